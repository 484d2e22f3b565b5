// sanm/memory.hpp

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

#ifndef SANM_MEMORY_HPP_
#define SANM_MEMORY_HPP_

#include "sanm/tensor.hpp"

namespace sanm {

/// FIR memory geometry: n1 look-back taps and n2 lookahead taps over channel
/// width d, with tap spacings s1/s2. n2 == 0 makes the memory unidirectional.
struct MemoryConfig {
  int d = 0;
  int n1 = 0;
  int n2 = 0;
  int s1 = 1;
  int s2 = 1;
};

void validate(const MemoryConfig& cfg);

/// Learnable per-channel FIR coefficients. Row i of `a` is the tap applied at
/// offset -s1*i (row 0 is the extra center tap); row j-1 of `c` is the tap at
/// offset +s2*j. `c` stays undefined when n2 == 0.
struct FirCoefficients {
  Tensor a;  // [(n1+1) x d]
  Tensor c;  // [n2 x d]
};

FirCoefficients zero_fir(const MemoryConfig& cfg);

/// Projection stages around one FIR memory: hidden ReLU layer then a linear
/// map back to the memory width.
struct DfsmnLayerParams {
  Tensor w;    // [d x hidden]
  Tensor b;    // [hidden]
  Tensor v_w;  // [hidden x d]
  Tensor v_b;  // [d]
  FirCoefficients fir;
};

DfsmnLayerParams init_dfsmn_params(const MemoryConfig& cfg, int hidden, Rng& rng);

/// Tap sums only: out[t] = sum_i a_i (.) p[t - s1*i] + sum_j c_j (.) p[t + s2*j].
/// Out-of-range taps read zero vectors.
Tensor fir_taps(const Tensor& p, const FirCoefficients& fir,
                const MemoryConfig& cfg);

/// Full memory update: prev_m + p + fir_taps(p). Row t of the result is the
/// memory output at time t; boundary taps are zero-padded.
Tensor fir_memory(const Tensor& p, const Tensor& prev_m,
                  const FirCoefficients& fir, const MemoryConfig& cfg);

/// One memory layer: h = relu(m_prev*w + b), p = h*v_w + v_b, then
/// fir_memory(p, m_prev). When valid_rows >= 0, p rows at or beyond it are
/// zeroed first so padding positions never feed the taps.
Tensor dfsmn_layer(const Tensor& m_prev, const DfsmnLayerParams& params,
                   const MemoryConfig& cfg, int valid_rows = -1);

/// Channel means per tap, ordered farthest look-back to farthest lookahead:
/// [mean(a_n1), ..., mean(a_1), 1 + mean(a_0), mean(c_1), ..., mean(c_n2)].
/// The center entry folds in the implicit unit passthrough of the memory sum.
Tensor average_filter(const FirCoefficients& fir, const MemoryConfig& cfg);

}  // namespace sanm

#endif  // SANM_MEMORY_HPP_
