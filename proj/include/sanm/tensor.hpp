// sanm/tensor.hpp

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

#ifndef SANM_TENSOR_HPP_
#define SANM_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sanm {

// Error taxonomy. The CLI maps DataError to exit code 2 and NumericError to 3;
// everything else is a usage/configuration problem (exit code 1).
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
class MaskError : public std::runtime_error {
 public:
  explicit MaskError(const std::string& msg) : std::runtime_error(msg) {}
};
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic random stream. Distributions are hand-rolled on top of
/// mt19937_64 so that a given seed produces the same values on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);

  /// Standard normal via Box-Muller.
  double normal();

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless tracked
  bool tracked = false;
};

/// Dense row-major f64 tensor. Copies of a Tensor share storage; values are
/// treated as immutable once an op has consumed them (the tape keeps handles
/// to the exact buffers it saw). Rank is 1 or 2 in practice; every dimension
/// must be positive.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool tracked = false);
  static Tensor full(std::vector<int> shape, double value, bool tracked = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool tracked = false);
  static Tensor scalar(double value, bool tracked = false);
  static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                        bool tracked = false);
  static Tensor normal(std::vector<int> shape, Rng& rng, double mean,
                       double stddev, bool tracked = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int rows() const { return impl_->shape[0]; }
  int cols() const { return impl_->shape.size() > 1 ? impl_->shape[1] : 1; }
  long long numel() const { return static_cast<long long>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  double& at(int r, int c) { return impl_->data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return impl_->data[static_cast<size_t>(r) * cols() + c]; }
  double& operator[](long long i) { return impl_->data[static_cast<size_t>(i)]; }
  double operator[](long long i) const { return impl_->data[static_cast<size_t>(i)]; }

  /// Value of a single-element tensor.
  double value() const;

  bool tracked() const { return impl_ && impl_->tracked; }
  /// Marks the tensor as a gradient carrier and allocates a zeroed grad slot.
  void set_tracked(bool tracked);
  double* grad();
  const double* grad() const;
  std::vector<double>& grad_vec() { return impl_->grad; }
  void zero_grad();

  /// Deep copy of values only (untracked).
  Tensor copy() const;

  bool same_shape(const Tensor& other) const;
  std::string shape_str() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of backward closures for one forward pass. Ops append to the
/// active tape as they execute; backward() replays them in reverse so every
/// use of a tensor contributes exactly one accumulation into its grad slot.
/// Single-threaded by contract.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
  }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. `loss` must be
  /// a tracked single-element tensor produced under this tape.
  void backward(const Tensor& loss);

  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  static GradTape* active();

  /// RAII activation: ops executed inside the scope record onto `tape`.
  class Scope {
   public:
    explicit Scope(GradTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* prev_;
  };

 private:
  std::vector<std::function<void()>> ops_;
};

// ---- Forward ops (all record onto the active tape when an input is tracked).

/// Standard matrix product a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m x k] * transpose(b[n x k]) without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// Adds a length-n bias row to every row of a[m x n].
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);

/// Row-wise softmax, numerically stabilized by per-row max subtraction.
/// `mask`, when given, is a same-shape 0/1 tensor; entries with mask<=0.5 are
/// excluded from normalization and exactly 0 in the output. A fully masked
/// row raises MaskError.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x, const Tensor& mask);

/// Normalizes the last axis of x[m x d] to mean 0 / variance 1 (epsilon 1e-6),
/// then applies the elementwise affine gain/bias (each length d). Requires d >= 2.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

/// Sum of all entries, as a [1] tensor.
Tensor sum(const Tensor& x);
/// Concatenates 2-D tensors with equal row counts along columns.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int start, int width);
/// Gathers table rows: out[i] = table[ids[i]].
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);
/// Zeroes every row at index >= valid_rows.
Tensor mask_rows(const Tensor& x, int valid_rows);

/// Compares reverse-mode gradients of the scalar function `f` against central
/// finite differences (default step 1e-5) for every coordinate of `params`,
/// and returns the worst error |analytic - numeric| / max(|analytic| + |numeric|, 1).
/// `f` must re-run the forward pass from the current parameter values.
double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double step = 1e-5);

constexpr double kLayerNormEpsilon = 1e-6;
constexpr double kMaskNegInf = -1e30;

}  // namespace sanm

#endif  // SANM_TENSOR_HPP_
