// sanm/sanm_layer.hpp

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

#ifndef SANM_SANM_LAYER_HPP_
#define SANM_SANM_LAYER_HPP_

#include "sanm/attention.hpp"
#include "sanm/memory.hpp"

namespace sanm {

/// Memory-equipped self-attention: multi-head attention plus a learnable FIR
/// filter over the concatenated value stream (width h*d_v = d_model).
struct SanmParams {
  AttentionParams attn;
  FirCoefficients fir;   // taps over the full value width
  MemoryConfig mem_cfg;  // mem_cfg.d == d_model
};

SanmParams init_sanm_params(const AttentionConfig& cfg,
                            const MemoryConfig& mem_cfg, Rng& rng);

/// Y = multi_head(x, x) + fir_taps(x * wv). The memory branch is the bare tap
/// sum: no hidden projection, no ReLU, and no passthrough term, so zero taps
/// reduce the layer exactly to plain self-attention. A causal mask combined
/// with lookahead taps (n2 > 0) is rejected: both branches must agree on
/// directionality.
Tensor sanm_layer(const Tensor& x, const AttentionConfig& cfg,
                  const SanmParams& params, const AttentionMask& mask,
                  double dropout = 0.0, Rng* rng = nullptr,
                  AttentionRecorder* recorder = nullptr);

}  // namespace sanm

#endif  // SANM_SANM_LAYER_HPP_
