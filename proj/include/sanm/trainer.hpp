// sanm/trainer.hpp

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

#ifndef SANM_TRAINER_HPP_
#define SANM_TRAINER_HPP_

#include <map>
#include <string>
#include <vector>

#include "sanm/frontend.hpp"
#include "sanm/model.hpp"

namespace sanm {

/// Warmup-then-decay schedule: lr = k * d^-0.5 * min(step^-0.5, step * warmup^-1.5).
/// Peaks at step == warmup and is continuous there.
struct ScheduleConfig {
  int d_model = 512;
  int warmup = 8000;
  double k = 1.0;
};

double noam_lr(long long step, const ScheduleConfig& cfg);

struct LossResult {
  Tensor loss;  // scalar, mean over non-pad positions
  int tokens;   // non-pad positions counted
};

/// Cross-entropy against the smoothed target distribution: (1 - smoothing) on
/// the gold id, smoothing / (vocab - 1) on every other id. Pad positions are
/// excluded from the mean; an all-pad target is an error. per_position, when
/// given, receives the per-row loss (0.0 at pad rows).
LossResult label_smoothed_ce(const Tensor& logits, const std::vector<int>& targets,
                             double smoothing, int pad_id,
                             std::vector<double>* per_position = nullptr);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.998;
  double epsilon = 1e-9;
};

struct OptimizerState {
  std::vector<Tensor> m;  // first moments, shaped like the parameters
  std::vector<Tensor> v;  // second moments
  long long step = 0;
};

OptimizerState init_adam(const std::vector<Tensor>& params);

/// Bias-corrected dense Adam on the accumulated gradients. A non-finite
/// gradient rejects the whole step before any state is touched.
void adam_step(std::vector<Tensor>& params, OptimizerState& state, double lr,
               const AdamConfig& cfg = {});

double global_grad_norm(const std::vector<Tensor>& params);

/// Scales all gradients so the global norm is at most max_norm.
void clip_gradients(std::vector<Tensor>& params, double max_norm);

struct TrainConfig {
  int batch_utterances = 4;
  long long max_steps = 1000;
  double label_smoothing = 0.1;
  double dropout = 0.1;
  uint64_t seed = 1;
  long long checkpoint_every = 0;  // 0 keeps only the final checkpoint
  double clip_norm = 5.0;
  ScheduleConfig schedule;
  long long log_every = 100;  // console cadence; the metrics file gets every step
};

/// Consumes trainer keys from kv (same flat key=value file as the model keys).
TrainConfig train_config_from_kv(std::map<std::string, std::string>& kv);

struct MetricsRecord {
  long long step;
  double loss;
  double lr;
  double grad_norm;  // pre-clip
};

struct TrainResult {
  std::string checkpoint_path;  // final, or the last good one on divergence
  std::string metrics_path;
  std::vector<MetricsRecord> metrics;
  bool diverged = false;
};

/// Teacher-forced training over a synthetic or loaded corpus (raw task tokens;
/// the vocabulary offset is applied internally). Deterministic given the seed:
/// two runs write bit-identical checkpoints and metrics logs. The metrics file
/// carries only reproducible fields; throughput goes to the console.
TrainResult train(const ModelConfig& model_cfg, const std::vector<Utterance>& corpus,
                  const TrainConfig& train_cfg, const std::string& out_dir);

}  // namespace sanm

#endif  // SANM_TRAINER_HPP_
