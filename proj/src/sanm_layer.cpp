// sanm/sanm_layer.cpp

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

#include "sanm/sanm_layer.hpp"

#include <string>

namespace sanm {

SanmParams init_sanm_params(const AttentionConfig& cfg,
                            const MemoryConfig& mem_cfg, Rng& rng) {
  validate(cfg);
  validate(mem_cfg);
  if (mem_cfg.d != cfg.d_model) {
    throw ConfigError("sanm: memory width " + std::to_string(mem_cfg.d) +
                      " must equal d_model " + std::to_string(cfg.d_model));
  }
  SanmParams p;
  p.attn = init_attention_params(cfg, rng);
  p.fir = zero_fir(mem_cfg);
  p.mem_cfg = mem_cfg;
  return p;
}

Tensor sanm_layer(const Tensor& x, const AttentionConfig& cfg,
                  const SanmParams& params, const AttentionMask& mask,
                  double dropout, Rng* rng, AttentionRecorder* recorder) {
  if (params.mem_cfg.d != cfg.d_model) {
    throw ConfigError("sanm: memory width " + std::to_string(params.mem_cfg.d) +
                      " must equal d_model " + std::to_string(cfg.d_model));
  }
  if (mask.has_causal_component() && params.mem_cfg.n2 > 0) {
    throw ConfigError("sanm: causal attention with lookahead taps (n2 = " +
                      std::to_string(params.mem_cfg.n2) +
                      ") breaks unidirectionality");
  }
  Tensor attn_out = multi_head(x, x, cfg, params.attn, mask, dropout, rng, recorder);
  // same projection the heads slice up, so the branches see identical values
  Tensor v_full = matmul(x, params.attn.wv);
  Tensor mem_out = fir_taps(v_full, params.fir, params.mem_cfg);
  return add(attn_out, mem_out);
}

}  // namespace sanm
