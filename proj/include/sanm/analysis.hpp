// sanm/analysis.hpp

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

#ifndef SANM_ANALYSIS_HPP_
#define SANM_ANALYSIS_HPP_

#include <string>
#include <vector>

#include "sanm/frontend.hpp"
#include "sanm/model.hpp"

namespace sanm {

/// Runs the decoder autoregressively from BOS and appends the argmax vocab id
/// at each step (ties break toward the lowest id). Stops on EOS or after
/// max_len emitted ids; the returned hypothesis excludes BOS and EOS.
std::vector<int> greedy_decode(const Tensor& z, const ModelParams& params,
                               const ModelConfig& cfg, int max_len);

/// Levenshtein(hyp, ref) / len(ref) with unit substitution, insertion, and
/// deletion costs. The reference must be non-empty.
double cer(const std::vector<int>& hyp, const std::vector<int>& ref);

/// Paths written by dump_analysis, in the order they were produced.
struct AnalysisDump {
  std::vector<std::string> files;
};

/// Runs the utterance through the model with recording enabled and writes into
/// out_dir: one CSV and one PGM rendering per attention sub-layer
/// (head-averaged weights), and one CSV of average_filter taps per memory
/// sub-layer. The decoder runs teacher-forced on the reference tokens so the
/// cross maps have gold alignment.
AnalysisDump dump_analysis(const ModelParams& params, const ModelConfig& cfg,
                           const Utterance& utt, const FeatureSpec& spec,
                           const std::string& out_dir);

/// Median forward wall time for one basic sub-layer kind at one sequence
/// length.
struct BenchPoint {
  int length = 0;
  double median_seconds = 0.0;
};

struct BenchSeries {
  SublayerKind kind = SublayerKind::kSan;
  std::vector<BenchPoint> points;
  double slope = 0.0;  // least-squares slope of log(time) vs log(length)
};

struct BenchReport {
  std::vector<BenchSeries> series;
};

/// Forward-only timing of the bare sub-layer: multi_head for san, dfsmn_layer
/// for dfsmn, sanm_layer for sanm. No feed-forward block, no backward pass.
/// Lengths must be strictly increasing and reps >= 5; when the timer cannot
/// resolve a single call the run loops the call until it can. The attention
/// variants use one head; memory variants use ten taps per side.
BenchReport bench_scaling(const std::vector<SublayerKind>& kinds,
                          const std::vector<int>& lengths, int d, int reps);

/// Grayscale PGM (P2) with values scaled so the matrix maximum maps to white.
void write_pgm(const std::string& path, const Tensor& m);

/// Plain numeric CSV, one row per tensor row, %.17g cells.
void write_csv(const std::string& path, const Tensor& m);

/// Reads a numeric CSV written by write_csv back into a tensor.
Tensor read_csv(const std::string& path);

}  // namespace sanm

#endif  // SANM_ANALYSIS_HPP_
