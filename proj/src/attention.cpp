// sanm/attention.cpp

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

#include "sanm/attention.hpp"

#include <cmath>
#include <string>

namespace sanm {

AttentionConfig AttentionConfig::split_evenly(int d_model, int h) {
  AttentionConfig cfg;
  cfg.d_model = d_model;
  cfg.h = h;
  if (h < 1 || d_model % h != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) +
                      " is not divisible by h " + std::to_string(h));
  }
  cfg.d_k = d_model / h;
  cfg.d_v = d_model / h;
  return cfg;
}

void validate(const AttentionConfig& cfg) {
  if (cfg.d_model < 1 || cfg.h < 1 || cfg.d_k < 1 || cfg.d_v < 1) {
    throw ConfigError("attention: all dimensions must be positive");
  }
  if (cfg.h * cfg.d_v != cfg.d_model) {
    throw ConfigError("attention: h*d_v = " + std::to_string(cfg.h * cfg.d_v) +
                      " must equal d_model = " + std::to_string(cfg.d_model));
  }
}

AttentionParams init_attention_params(const AttentionConfig& cfg, Rng& rng) {
  validate(cfg);
  AttentionParams p;
  const double in_scale = std::sqrt(1.0 / cfg.d_model);
  const double out_scale = std::sqrt(1.0 / (cfg.h * cfg.d_v));
  p.wq = Tensor::uniform({cfg.d_model, cfg.h * cfg.d_k}, rng, -in_scale, in_scale);
  p.wk = Tensor::uniform({cfg.d_model, cfg.h * cfg.d_k}, rng, -in_scale, in_scale);
  p.wv = Tensor::uniform({cfg.d_model, cfg.h * cfg.d_v}, rng, -in_scale, in_scale);
  p.wo = Tensor::uniform({cfg.h * cfg.d_v, cfg.d_model}, rng, -out_scale, out_scale);
  return p;
}

AttentionMask make_causal_mask(int t) {
  if (t < 1) throw ConfigError("make_causal_mask: length must be >= 1");
  AttentionMask m;
  m.kind = MaskKind::kCausal;
  m.allowed = Tensor::zeros({t, t});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j <= i; ++j) m.allowed.at(i, j) = 1.0;
  return m;
}

AttentionMask make_padding_mask(int t_query, int t_key, int valid_keys) {
  if (t_query < 1 || t_key < 1) {
    throw ConfigError("make_padding_mask: sizes must be >= 1");
  }
  if (valid_keys < 1 || valid_keys > t_key) {
    throw MaskError("make_padding_mask: valid_keys " + std::to_string(valid_keys) +
                    " out of range for " + std::to_string(t_key) + " keys");
  }
  AttentionMask m;
  m.kind = MaskKind::kPadding;
  m.allowed = Tensor::zeros({t_query, t_key});
  for (int i = 0; i < t_query; ++i)
    for (int j = 0; j < valid_keys; ++j) m.allowed.at(i, j) = 1.0;
  return m;
}

AttentionMask combine_masks(const AttentionMask& a, const AttentionMask& b) {
  if (!a.allowed.defined()) {
    AttentionMask m = b;
    if (a.has_causal_component() && m.kind == MaskKind::kPadding) m.kind = MaskKind::kCombined;
    return m;
  }
  if (!b.allowed.defined()) return combine_masks(b, a);
  if (!a.allowed.same_shape(b.allowed)) {
    throw ShapeError("combine_masks: " + a.allowed.shape_str() + " vs " +
                     b.allowed.shape_str());
  }
  AttentionMask m;
  m.kind = (a.has_causal_component() || b.has_causal_component())
               ? MaskKind::kCombined
               : MaskKind::kPadding;
  m.allowed = Tensor::zeros(a.allowed.shape());
  for (long long i = 0; i < m.allowed.numel(); ++i) {
    m.allowed[i] = (a.allowed[i] > 0.5 && b.allowed[i] > 0.5) ? 1.0 : 0.0;
  }
  return m;
}

AttentionResult scaled_dot_product(const Tensor& q, const Tensor& k,
                                   const Tensor& v, const AttentionMask& mask,
                                   double dropout, Rng* rng) {
  if (q.cols() != k.cols()) {
    throw ShapeError("scaled_dot_product: query width " + q.shape_str() +
                     " vs key width " + k.shape_str());
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("scaled_dot_product: key count " + k.shape_str() +
                     " vs value count " + v.shape_str());
  }
  if (mask.allowed.defined() &&
      (mask.allowed.rows() != q.rows() || mask.allowed.cols() != k.rows())) {
    throw ShapeError("scaled_dot_product: mask " + mask.allowed.shape_str() +
                     " does not cover " + std::to_string(q.rows()) + "x" +
                     std::to_string(k.rows()) + " scores");
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = scale(matmul_nt(q, k), inv_sqrt_dk);
  Tensor weights = mask.allowed.defined() ? softmax_rows(scores, mask.allowed)
                                          : softmax_rows(scores);
  Tensor used = weights;
  if (dropout > 0.0) {
    if (rng == nullptr) throw ConfigError("scaled_dot_product: dropout needs an rng");
    used = sanm::dropout(weights, dropout, *rng);
  }
  return AttentionResult{matmul(used, v), weights};
}

Tensor multi_head(const Tensor& xq, const Tensor& xkv,
                  const AttentionConfig& cfg, const AttentionParams& params,
                  const AttentionMask& mask, double dropout, Rng* rng,
                  AttentionRecorder* recorder) {
  validate(cfg);
  if (xq.cols() != cfg.d_model || xkv.cols() != cfg.d_model) {
    throw ShapeError("multi_head: inputs " + xq.shape_str() + ", " +
                     xkv.shape_str() + " do not match d_model " +
                     std::to_string(cfg.d_model));
  }
  Tensor q_full = matmul(xq, params.wq);
  Tensor k_full = matmul(xkv, params.wk);
  Tensor v_full = matmul(xkv, params.wv);
  std::vector<Tensor> heads;
  heads.reserve(cfg.h);
  for (int i = 0; i < cfg.h; ++i) {
    Tensor qi = slice_cols(q_full, i * cfg.d_k, cfg.d_k);
    Tensor ki = slice_cols(k_full, i * cfg.d_k, cfg.d_k);
    Tensor vi = slice_cols(v_full, i * cfg.d_v, cfg.d_v);
    AttentionResult r = scaled_dot_product(qi, ki, vi, mask, dropout, rng);
    if (recorder) recorder->head_weights.push_back(r.weights);
    heads.push_back(r.context);
  }
  Tensor concat = cfg.h == 1 ? heads[0] : concat_cols(heads);
  return matmul(concat, params.wo);
}

std::pair<double, double> attention_split(const Tensor& weights, int t) {
  if (weights.shape().size() != 2) {
    throw ShapeError("attention_split: need a 2-D weights matrix");
  }
  if (t < 0 || t >= weights.rows()) {
    throw ShapeError("attention_split: position " + std::to_string(t) +
                     " out of range for " + weights.shape_str());
  }
  double past = 0.0, future = 0.0;
  for (int j = 0; j < weights.cols(); ++j) {
    (j <= t ? past : future) += weights.at(t, j);
  }
  return {past, future};
}

}  // namespace sanm
