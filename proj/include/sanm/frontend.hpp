// sanm/frontend.hpp

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

#ifndef SANM_FRONTEND_HPP_
#define SANM_FRONTEND_HPP_

#include <string>
#include <vector>

#include "sanm/tensor.hpp"

namespace sanm {

/// Low-frame-rate stacking geometry: a (left + 1 + right)-frame context window
/// emitted every `hop` base frames.
struct FeatureSpec {
  int base_dim = 80;
  int left = 3;
  int right = 3;
  int hop = 6;

  int stacked_dim() const { return (left + 1 + right) * base_dim; }
  int output_length(int t_base) const { return (t_base + hop - 1) / hop; }
};

/// Stacks frames [hop*k - left, hop*k + right] around center hop*k (0-based)
/// into output row k, clamping out-of-range indices to the edges. Pure
/// re-indexing: every output scalar is some input scalar.
Tensor lfr_stack(const Tensor& frames, const FeatureSpec& spec);

/// Per-utterance mean/variance normalization along time, one mean and
/// standard deviation per feature dimension.
Tensor mvn(const Tensor& feats);

/// Pseudo-ASR generator: every token owns a fixed random emission template;
/// an utterance is a token sequence, each emitting its template for a sampled
/// duration plus i.i.d. Gaussian noise.
struct SyntheticTask {
  int alphabet = 20;
  int min_tokens = 2;
  int max_tokens = 12;
  int min_frames = 6;   // per-token duration range, in base frames
  int max_frames = 12;
  double noise = 0.0;
  uint64_t template_seed = 1234;  // fixes the per-token templates
  int base_dim = 80;
};

void validate(const SyntheticTask& task);

struct Utterance {
  std::string id;
  Tensor feats;             // [T x base_dim], f32-representable values
  std::vector<int> tokens;  // raw task tokens in [0, alphabet)
};

/// Deterministic per seed. Feature values are rounded to f32 precision at
/// generation time so the corpus round-trip below is bit-exact.
Utterance generate_utterance(const SyntheticTask& task, uint64_t seed);

/// Utterance i uses seed base_seed + i and id "<prefix>-<i>"; two corpora with
/// different seed bases are disjoint by construction.
std::vector<Utterance> generate_corpus(const SyntheticTask& task,
                                       uint64_t base_seed, int count,
                                       const std::string& prefix);

/// Corpus container: magic "SANMCORP", u32 version, u32 utterance count; per
/// utterance a length-prefixed id, u32 frame count, u32 feature width, u32
/// token count, f32 features row-major, u32 token ids. Little-endian.
void write_corpus(const std::string& path, const std::vector<Utterance>& utts);
std::vector<Utterance> read_corpus(const std::string& path);

}  // namespace sanm

#endif  // SANM_FRONTEND_HPP_
