// sanm/memory.cpp

// Copyright 2026  The sanm authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "sanm/memory.hpp"

#include <cmath>
#include <string>

namespace sanm {

void validate(const MemoryConfig& cfg) {
  if (cfg.d < 1) throw ConfigError("memory: channel width must be >= 1");
  if (cfg.n1 < 0 || cfg.n2 < 0) {
    throw ConfigError("memory: tap orders must be >= 0");
  }
  if (cfg.s1 < 1 || cfg.s2 < 1) {
    throw ConfigError("memory: strides must be >= 1");
  }
}

FirCoefficients zero_fir(const MemoryConfig& cfg) {
  validate(cfg);
  FirCoefficients fir;
  fir.a = Tensor::zeros({cfg.n1 + 1, cfg.d});
  if (cfg.n2 > 0) fir.c = Tensor::zeros({cfg.n2, cfg.d});
  return fir;
}

DfsmnLayerParams init_dfsmn_params(const MemoryConfig& cfg, int hidden, Rng& rng) {
  validate(cfg);
  if (hidden < 1) throw ConfigError("memory: hidden width must be >= 1");
  DfsmnLayerParams p;
  const double in_scale = std::sqrt(1.0 / cfg.d);
  const double out_scale = std::sqrt(1.0 / hidden);
  p.w = Tensor::uniform({cfg.d, hidden}, rng, -in_scale, in_scale);
  p.b = Tensor::zeros({hidden});
  p.v_w = Tensor::uniform({hidden, cfg.d}, rng, -out_scale, out_scale);
  p.v_b = Tensor::zeros({cfg.d});
  // zero taps make a fresh layer an identity-plus-projection residual
  p.fir = zero_fir(cfg);
  return p;
}

namespace {

void check_fir_shapes(const Tensor& p, const FirCoefficients& fir,
                      const MemoryConfig& cfg) {
  validate(cfg);
  if (p.shape().size() != 2 || p.cols() != cfg.d) {
    throw ShapeError("fir: input " + p.shape_str() + " does not match width " +
                     std::to_string(cfg.d));
  }
  if (!fir.a.defined() || fir.a.rows() != cfg.n1 + 1 || fir.a.cols() != cfg.d) {
    throw ShapeError("fir: look-back taps must be [" + std::to_string(cfg.n1 + 1) +
                     "x" + std::to_string(cfg.d) + "]");
  }
  if (cfg.n2 > 0 && (!fir.c.defined() || fir.c.rows() != cfg.n2 ||
                     fir.c.cols() != cfg.d)) {
    throw ShapeError("fir: lookahead taps must be [" + std::to_string(cfg.n2) +
                     "x" + std::to_string(cfg.d) + "]");
  }
}

}  // namespace

Tensor fir_taps(const Tensor& p, const FirCoefficients& fir,
                const MemoryConfig& cfg) {
  check_fir_shapes(p, fir, cfg);
  const int t_len = p.rows(), d = cfg.d;
  Tensor out = Tensor::zeros({t_len, d});
  for (int t = 0; t < t_len; ++t) {
    double* yr = out.data() + static_cast<size_t>(t) * d;
    for (int i = 0; i <= cfg.n1; ++i) {
      const int src = t - cfg.s1 * i;
      if (src < 0) break;  // earlier taps only go further back
      const double* ar = fir.a.data() + static_cast<size_t>(i) * d;
      const double* pr = p.data() + static_cast<size_t>(src) * d;
      for (int j = 0; j < d; ++j) yr[j] += ar[j] * pr[j];
    }
    for (int jtap = 1; jtap <= cfg.n2; ++jtap) {
      const int src = t + cfg.s2 * jtap;
      if (src >= t_len) break;
      const double* cr = fir.c.data() + static_cast<size_t>(jtap - 1) * d;
      const double* pr = p.data() + static_cast<size_t>(src) * d;
      for (int j = 0; j < d; ++j) yr[j] += cr[j] * pr[j];
    }
  }
  const bool track = GradTape::active() &&
                     (p.tracked() || fir.a.tracked() ||
                      (fir.c.defined() && fir.c.tracked()));
  if (track) {
    out.set_tracked(true);
    auto pi = p.impl(), ai = fir.a.impl(), oi = out.impl();
    auto ci = fir.c.defined() ? fir.c.impl() : nullptr;
    const MemoryConfig cc = cfg;
    GradTape::active()->record([pi, ai, ci, oi, cc, t_len, d] {
      for (int t = 0; t < t_len; ++t) {
        const double* g = oi->grad.data() + static_cast<size_t>(t) * d;
        for (int i = 0; i <= cc.n1; ++i) {
          const int src = t - cc.s1 * i;
          if (src < 0) break;
          const double* ar = ai->data.data() + static_cast<size_t>(i) * d;
          const double* pr = pi->data.data() + static_cast<size_t>(src) * d;
          if (pi->tracked) {
            double* gp = pi->grad.data() + static_cast<size_t>(src) * d;
            for (int j = 0; j < d; ++j) gp[j] += ar[j] * g[j];
          }
          if (ai->tracked) {
            double* ga = ai->grad.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) ga[j] += pr[j] * g[j];
          }
        }
        for (int jtap = 1; jtap <= cc.n2; ++jtap) {
          const int src = t + cc.s2 * jtap;
          if (src >= t_len) break;
          const double* cr = ci->data.data() + static_cast<size_t>(jtap - 1) * d;
          const double* pr = pi->data.data() + static_cast<size_t>(src) * d;
          if (pi->tracked) {
            double* gp = pi->grad.data() + static_cast<size_t>(src) * d;
            for (int j = 0; j < d; ++j) gp[j] += cr[j] * g[j];
          }
          if (ci->tracked) {
            double* gc = ci->grad.data() + static_cast<size_t>(jtap - 1) * d;
            for (int j = 0; j < d; ++j) gc[j] += pr[j] * g[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor fir_memory(const Tensor& p, const Tensor& prev_m,
                  const FirCoefficients& fir, const MemoryConfig& cfg) {
  if (!p.same_shape(prev_m)) {
    throw ShapeError("fir_memory: input " + p.shape_str() +
                     " vs previous memory " + prev_m.shape_str());
  }
  return add(add(prev_m, p), fir_taps(p, fir, cfg));
}

Tensor dfsmn_layer(const Tensor& m_prev, const DfsmnLayerParams& params,
                   const MemoryConfig& cfg, int valid_rows) {
  Tensor h = relu(add_bias(matmul(m_prev, params.w), params.b));
  Tensor p = add_bias(matmul(h, params.v_w), params.v_b);
  // the bias makes p nonzero even on zeroed padding rows; hide them from taps
  if (valid_rows >= 0) p = mask_rows(p, valid_rows);
  return fir_memory(p, m_prev, params.fir, cfg);
}

Tensor average_filter(const FirCoefficients& fir, const MemoryConfig& cfg) {
  validate(cfg);
  Tensor dummy = Tensor::zeros({1, cfg.d});
  check_fir_shapes(dummy, fir, cfg);
  Tensor out = Tensor::zeros({cfg.n1 + cfg.n2 + 1});
  const int d = cfg.d;
  for (int i = 0; i <= cfg.n1; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += fir.a.at(i, j);
    mean /= d;
    // a_i sits i steps back from the center slot at index n1
    out[cfg.n1 - i] = (i == 0) ? 1.0 + mean : mean;
  }
  for (int jtap = 1; jtap <= cfg.n2; ++jtap) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += fir.c.at(jtap - 1, j);
    mean /= d;
    out[cfg.n1 + jtap] = mean;
  }
  return out;
}

}  // namespace sanm
