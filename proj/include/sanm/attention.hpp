// sanm/attention.hpp

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

#ifndef SANM_ATTENTION_HPP_
#define SANM_ATTENTION_HPP_

#include <utility>
#include <vector>

#include "sanm/tensor.hpp"

namespace sanm {

struct AttentionConfig {
  int d_model = 0;
  int h = 1;
  int d_k = 0;  // per-head key width
  int d_v = 0;  // per-head value width

  /// d_k = d_v = d_model / h.
  static AttentionConfig split_evenly(int d_model, int h);
};

/// Requires h * d_v == d_model (the output projection maps back to d_model)
/// and d_k >= 1.
void validate(const AttentionConfig& cfg);

/// Projections for all heads, stacked along columns: head i of wq occupies
/// columns [i*d_k, (i+1)*d_k), and likewise for wk/wv with their widths.
/// No bias terms.
struct AttentionParams {
  Tensor wq;  // [d_model x h*d_k]
  Tensor wk;  // [d_model x h*d_k]
  Tensor wv;  // [d_model x h*d_v]
  Tensor wo;  // [h*d_v x d_model]
};

AttentionParams init_attention_params(const AttentionConfig& cfg, Rng& rng);

enum class MaskKind { kPadding, kCausal, kCombined };

/// Boolean key-visibility pattern for one attention call. `allowed` is a
/// [Tq x Tk] 0/1 tensor; an undefined tensor means everything is visible.
struct AttentionMask {
  MaskKind kind = MaskKind::kPadding;
  Tensor allowed;

  static AttentionMask none() { return AttentionMask{}; }
  bool has_causal_component() const { return kind != MaskKind::kPadding; }
};

/// Lower-triangular self-attention mask: query t sees keys 0..t.
AttentionMask make_causal_mask(int t);

/// Keys at index >= valid_keys are hidden from every query.
AttentionMask make_padding_mask(int t_query, int t_key, int valid_keys);

/// Elementwise intersection of the allowed sets.
AttentionMask combine_masks(const AttentionMask& a, const AttentionMask& b);

struct AttentionResult {
  Tensor context;  // [Tq x d_v]
  Tensor weights;  // [Tq x Tk], row-stochastic over allowed keys
};

/// Scaled dot-product attention for a single head. Scores are Q*K^T/sqrt(d_k),
/// masked-softmaxed into `weights`; `context` is weights*V. When dropout > 0
/// the context uses a dropped copy of the weights but the returned weights stay
/// intact for analysis.
AttentionResult scaled_dot_product(const Tensor& q, const Tensor& k,
                                   const Tensor& v, const AttentionMask& mask,
                                   double dropout = 0.0, Rng* rng = nullptr);

/// Captures per-head attention weights when passed to multi_head.
struct AttentionRecorder {
  std::vector<Tensor> head_weights;
};

/// Multi-head attention: queries projected from xq, keys/values from xkv
/// (self-attention when both are the same tensor, cross-attention otherwise).
/// Head contexts are concatenated and projected by wo.
Tensor multi_head(const Tensor& xq, const Tensor& xkv,
                  const AttentionConfig& cfg, const AttentionParams& params,
                  const AttentionMask& mask, double dropout = 0.0,
                  Rng* rng = nullptr, AttentionRecorder* recorder = nullptr);

/// Splits attention row t (0-based) of a row-stochastic weights matrix into
/// the mass on keys <= t and the mass on keys > t.
std::pair<double, double> attention_split(const Tensor& weights, int t);

}  // namespace sanm

#endif  // SANM_ATTENTION_HPP_
