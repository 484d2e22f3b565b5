// sanm/tensor.cpp

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

#include "sanm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace sanm {

namespace {

long long shape_numel(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) n *= d;
  return n;
}

void check_shape_positive(const std::vector<int>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
  }
}

std::string shape_to_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

// c = or += a[m x k] * b[k x n], row-major, ikj order.
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c = or += a[m x k] * transpose(b[n x k]); dot-product kernel.
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      if (accumulate) crow[j] += acc; else crow[j] = acc;
    }
  }
}

// c[k x n] = or += transpose(a[m x k]) * b[m x n]; outer-product accumulation.
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(k) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    const double* brow = b + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

thread_local GradTape* g_active_tape = nullptr;

// Marks the output of an op as tracked under the active tape.
void track_output(Tensor& out) { out.set_tracked(true); }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (GradTape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->tracked()) return true;
  }
  return false;
}

}  // namespace

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ConfigError("uniform_int: empty range");
  const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
  // Multiply-shift mapping of a 64-bit draw onto the span.
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(span);
  return lo + static_cast<int>(prod >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Tensor Tensor::zeros(std::vector<int> shape, bool tracked) {
  check_shape_positive(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(shape_numel(impl->shape)), 0.0);
  Tensor t(impl);
  if (tracked) t.set_tracked(true);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool tracked) {
  Tensor t = zeros(std::move(shape), tracked);
  std::fill(t.vec().begin(), t.vec().end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool tracked) {
  check_shape_positive(shape);
  if (shape_numel(shape) != static_cast<long long>(data.size())) {
    throw ShapeError("from_data: " + shape_to_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  Tensor t(impl);
  if (tracked) t.set_tracked(true);
  return t;
}

Tensor Tensor::scalar(double value, bool tracked) {
  return from_data({1}, {value}, tracked);
}

Tensor Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                       bool tracked) {
  Tensor t = zeros(std::move(shape), tracked);
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::normal(std::vector<int> shape, Rng& rng, double mean,
                      double stddev, bool tracked) {
  Tensor t = zeros(std::move(shape), tracked);
  for (auto& v : t.vec()) v = rng.normal(mean, stddev);
  return t;
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value(): tensor " + shape_str() + " is not a scalar");
  return impl_->data[0];
}

void Tensor::set_tracked(bool tracked) {
  impl_->tracked = tracked;
  if (tracked && impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  }
  if (!tracked) impl_->grad.clear();
}

double* Tensor::grad() { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }
const double* Tensor::grad() const {
  return impl_->grad.empty() ? nullptr : impl_->grad.data();
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::copy() const {
  return from_data(impl_->shape, impl_->data, false);
}

bool Tensor::same_shape(const Tensor& other) const {
  return impl_->shape == other.impl_->shape;
}

std::string Tensor::shape_str() const { return shape_to_str(impl_->shape); }

GradTape* GradTape::active() { return g_active_tape; }

GradTape::Scope::Scope(GradTape& tape) : prev_(g_active_tape) {
  g_active_tape = &tape;
}

GradTape::Scope::~Scope() { g_active_tape = prev_; }

void GradTape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + loss.shape_str());
  }
  if (!loss.tracked()) {
    throw ConfigError("backward: loss is not tracked by this tape");
  }
  loss.impl()->grad[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + a.shape_str() +
                     " x " + b.shape_str());
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  mm_nn(a.data(), b.data(), out.data(), m, k, n, false);
  if (should_record({&a, &b})) {
    track_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    GradTape::active()->record([ai, bi, oi, m, k, n] {
      const double* g = oi->grad.data();
      if (ai->tracked) mm_nt(g, bi->data.data(), ai->grad.data(), m, n, k, true);
      if (bi->tracked) mm_tn(ai->data.data(), g, bi->grad.data(), m, k, n, true);
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree for " + a.shape_str() +
                     " x " + b.shape_str() + "^T");
  }
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n});
  mm_nt(a.data(), b.data(), out.data(), m, k, n, false);
  if (should_record({&a, &b})) {
    track_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    GradTape::active()->record([ai, bi, oi, m, k, n] {
      const double* g = oi->grad.data();
      if (ai->tracked) mm_nn(g, bi->data.data(), ai->grad.data(), m, n, k, true);
      if (bi->tracked) mm_tn(g, ai->data.data(), bi->grad.data(), m, n, k, true);
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = out.vec().size();
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  if (should_record({&a, &b})) {
    track_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    GradTape::active()->record([ai, bi, oi, n] {
      const double* g = oi->grad.data();
      if (ai->tracked) {
        for (size_t i = 0; i < n; ++i) ai->grad[i] += g[i];
      }
      if (bi->tracked) {
        for (size_t i = 0; i < n; ++i) bi->grad[i] += g[i];
      }
    });
  }
  return out;
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (a.shape().size() != 2 || bias.shape().size() != 1 || bias.rows() != a.cols()) {
    throw ShapeError("add_bias: " + a.shape_str() + " + " + bias.shape_str());
  }
  const int m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + bias[j];
  if (should_record({&a, &bias})) {
    track_output(out);
    auto ai = a.impl(), bi = bias.impl(), oi = out.impl();
    GradTape::active()->record([ai, bi, oi, m, n] {
      const double* g = oi->grad.data();
      if (ai->tracked) {
        for (size_t i = 0; i < static_cast<size_t>(m) * n; ++i) ai->grad[i] += g[i];
      }
      if (bi->tracked) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) bi->grad[j] += g[static_cast<size_t>(i) * n + j];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  const size_t n = out.vec().size();
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * s;
  if (should_record({&a})) {
    track_output(out);
    auto ai = a.impl(), oi = out.impl();
    GradTape::active()->record([ai, oi, s, n] {
      const double* g = oi->grad.data();
      for (size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * s;
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const size_t n = out.vec().size();
  for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (should_record({&x})) {
    track_output(out);
    auto xi = x.impl(), oi = out.impl();
    GradTape::active()->record([xi, oi, n] {
      const double* g = oi->grad.data();
      // subgradient at 0 is 0
      for (size_t i = 0; i < n; ++i) {
        if (xi->data[i] > 0.0) xi->grad[i] += g[i];
      }
    });
  }
  return out;
}

namespace {

Tensor softmax_rows_impl(const Tensor& x, const Tensor* mask) {
  if (x.shape().size() != 2) throw ShapeError("softmax_rows: need 2-D input, got " + x.shape_str());
  if (mask && !x.same_shape(*mask)) {
    throw ShapeError("softmax_rows: mask shape " + mask->shape_str() +
                     " does not match " + x.shape_str());
  }
  const int m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    const double* xr = x.data() + static_cast<size_t>(i) * n;
    const double* mr = mask ? mask->data() + static_cast<size_t>(i) * n : nullptr;
    double mx = -HUGE_VAL;
    int allowed = 0;
    for (int j = 0; j < n; ++j) {
      const double v = mr && mr[j] <= 0.5 ? kMaskNegInf : xr[j];
      if (v > mx) mx = v;
      if (!mr || mr[j] > 0.5) ++allowed;
    }
    if (allowed == 0) {
      throw MaskError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    }
    double* yr = out.data() + static_cast<size_t>(i) * n;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mr && mr[j] <= 0.5) {
        yr[j] = 0.0;
      } else {
        yr[j] = std::exp(xr[j] - mx);
        sum += yr[j];
      }
    }
    for (int j = 0; j < n; ++j) yr[j] /= sum;
    if (mr) {
      for (int j = 0; j < n; ++j) {
        if (mr[j] <= 0.5) yr[j] = 0.0;
      }
    }
  }
  if (should_record({&x})) {
    track_output(out);
    auto xi = x.impl(), oi = out.impl();
    GradTape::active()->record([xi, oi, m, n] {
      for (int i = 0; i < m; ++i) {
        const double* y = oi->data.data() + static_cast<size_t>(i) * n;
        const double* g = oi->grad.data() + static_cast<size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * y[j];
        double* gx = xi->grad.data() + static_cast<size_t>(i) * n;
        // masked outputs are exactly 0, so they contribute nothing here
        for (int j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_rows_impl(x, nullptr); }
Tensor softmax_rows(const Tensor& x, const Tensor& mask) {
  return softmax_rows_impl(x, &mask);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.shape().size() != 2) throw ShapeError("layer_norm: need 2-D input, got " + x.shape_str());
  const int m = x.rows(), d = x.cols();
  if (d < 2) throw ConfigError("layer_norm: last axis must have size >= 2");
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias must have length " + std::to_string(d));
  }
  Tensor out = Tensor::zeros({m, d});
  std::vector<double> means(m), inv_stds(m);
  for (int i = 0; i < m; ++i) {
    const double* xr = x.data() + static_cast<size_t>(i) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= d;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    means[i] = mean;
    inv_stds[i] = inv_std;
    double* yr = out.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) yr[j] = gain[j] * (xr[j] - mean) * inv_std + bias[j];
  }
  if (should_record({&x, &gain, &bias})) {
    track_output(out);
    auto xi = x.impl(), gi = gain.impl(), bi = bias.impl(), oi = out.impl();
    GradTape::active()->record([xi, gi, bi, oi, m, d, means, inv_stds] {
      for (int i = 0; i < m; ++i) {
        const double* xr = xi->data.data() + static_cast<size_t>(i) * d;
        const double* g = oi->grad.data() + static_cast<size_t>(i) * d;
        const double mean = means[i], inv_std = inv_stds[i];
        // dxhat = g * gain; reduce to the two row sums needed for dx
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
          const double xhat = (xr[j] - mean) * inv_std;
          const double dxhat = g[j] * gi->data[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (gi->tracked) gi->grad[j] += g[j] * xhat;
          if (bi->tracked) bi->grad[j] += g[j];
        }
        if (xi->tracked) {
          double* gx = xi->grad.data() + static_cast<size_t>(i) * d;
          for (int j = 0; j < d; ++j) {
            const double xhat = (xr[j] - mean) * inv_std;
            const double dxhat = g[j] * gi->data[j];
            gx[j] += inv_std * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
          }
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (const double v : x.vec()) s += v;
  Tensor out = Tensor::scalar(s);
  if (should_record({&x})) {
    track_output(out);
    auto xi = x.impl(), oi = out.impl();
    GradTape::active()->record([xi, oi] {
      const double g = oi->grad[0];
      for (auto& gv : xi->grad) gv += g;
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const int m = parts[0].rows();
  int n = 0;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 2 || p.rows() != m) {
      throw ShapeError("concat_cols: row counts disagree");
    }
    n += p.cols();
  }
  Tensor out = Tensor::zeros({m, n});
  int col = 0;
  for (const Tensor& p : parts) {
    const int w = p.cols();
    for (int i = 0; i < m; ++i) {
      std::copy(p.data() + static_cast<size_t>(i) * w,
                p.data() + static_cast<size_t>(i) * w + w,
                out.data() + static_cast<size_t>(i) * n + col);
    }
    col += w;
  }
  bool any_tracked = false;
  for (const Tensor& p : parts) any_tracked = any_tracked || p.tracked();
  if (GradTape::active() && any_tracked) {
    track_output(out);
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const Tensor& p : parts) impls.push_back(p.impl());
    auto oi = out.impl();
    GradTape::active()->record([impls, oi, m, n] {
      int col = 0;
      for (const auto& pi : impls) {
        const int w = static_cast<int>(pi->shape[1]);
        if (pi->tracked) {
          for (int i = 0; i < m; ++i) {
            const double* g = oi->grad.data() + static_cast<size_t>(i) * n + col;
            double* gp = pi->grad.data() + static_cast<size_t>(i) * w;
            for (int j = 0; j < w; ++j) gp[j] += g[j];
          }
        }
        col += w;
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, int start, int width) {
  if (x.shape().size() != 2 || start < 0 || width <= 0 || start + width > x.cols()) {
    throw ShapeError("slice_cols: window [" + std::to_string(start) + ", " +
                     std::to_string(start + width) + ") out of range for " + x.shape_str());
  }
  const int m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, width});
  for (int i = 0; i < m; ++i) {
    std::copy(x.data() + static_cast<size_t>(i) * n + start,
              x.data() + static_cast<size_t>(i) * n + start + width,
              out.data() + static_cast<size_t>(i) * width);
  }
  if (should_record({&x})) {
    track_output(out);
    auto xi = x.impl(), oi = out.impl();
    GradTape::active()->record([xi, oi, m, n, start, width] {
      for (int i = 0; i < m; ++i) {
        const double* g = oi->grad.data() + static_cast<size_t>(i) * width;
        double* gx = xi->grad.data() + static_cast<size_t>(i) * n + start;
        for (int j = 0; j < width; ++j) gx[j] += g[j];
      }
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) throw ShapeError("embedding_lookup: table must be 2-D");
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const int v = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw DataError("embedding_lookup: id " + std::to_string(id) +
                      " outside table of size " + std::to_string(v));
    }
  }
  const int m = static_cast<int>(ids.size());
  Tensor out = Tensor::zeros({m, d});
  for (int i = 0; i < m; ++i) {
    std::copy(table.data() + static_cast<size_t>(ids[i]) * d,
              table.data() + static_cast<size_t>(ids[i]) * d + d,
              out.data() + static_cast<size_t>(i) * d);
  }
  if (should_record({&table})) {
    track_output(out);
    auto ti = table.impl(), oi = out.impl();
    GradTape::active()->record([ti, oi, ids, d] {
      for (size_t i = 0; i < ids.size(); ++i) {
        const double* g = oi->grad.data() + i * d;
        double* gt = ti->grad.data() + static_cast<size_t>(ids[i]) * d;
        for (int j = 0; j < d; ++j) gt[j] += g[j];
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const size_t n = x.vec().size();
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(n);
  Tensor out = Tensor::zeros(x.shape());
  for (size_t i = 0; i < n; ++i) {
    const double m = rng.uniform() >= rate ? keep_scale : 0.0;
    (*mask)[i] = m;
    out[i] = x[i] * m;
  }
  if (should_record({&x})) {
    track_output(out);
    auto xi = x.impl(), oi = out.impl();
    GradTape::active()->record([xi, oi, mask, n] {
      const double* g = oi->grad.data();
      for (size_t i = 0; i < n; ++i) xi->grad[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor mask_rows(const Tensor& x, int valid_rows) {
  if (x.shape().size() != 2) throw ShapeError("mask_rows: need 2-D input");
  const int m = x.rows(), n = x.cols();
  if (valid_rows < 0 || valid_rows > m) {
    throw ShapeError("mask_rows: valid_rows " + std::to_string(valid_rows) +
                     " out of range for " + x.shape_str());
  }
  if (valid_rows == m) return x;
  Tensor out = Tensor::zeros({m, n});
  std::copy(x.data(), x.data() + static_cast<size_t>(valid_rows) * n, out.data());
  if (should_record({&x})) {
    track_output(out);
    auto xi = x.impl(), oi = out.impl();
    GradTape::active()->record([xi, oi, valid_rows, n] {
      const double* g = oi->grad.data();
      for (size_t i = 0; i < static_cast<size_t>(valid_rows) * n; ++i) xi->grad[i] += g[i];
    });
  }
  return out;
}

double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double step) {
  for (const Tensor& p : params) {
    if (!p.tracked()) throw ConfigError("grad_check: all params must be tracked");
    const_cast<Tensor&>(p).zero_grad();
  }
  GradTape tape;
  std::vector<std::vector<double>> analytic;
  {
    GradTape::Scope scope(tape);
    Tensor loss = f();
    if (!std::isfinite(loss.value())) {
      throw NumericError("grad_check: non-finite loss at probe point");
    }
    tape.backward(loss);
  }
  for (const Tensor& p : params) analytic.push_back(p.impl()->grad);

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (long long i = 0; i < p.numel(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double f_plus = f().value();
      p[i] = saved - step;
      const double f_minus = f().value();
      p[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double ana = analytic[pi][static_cast<size_t>(i)];
      const double err =
          std::abs(ana - numeric) / std::max(std::abs(ana) + std::abs(numeric), 1.0);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace sanm
