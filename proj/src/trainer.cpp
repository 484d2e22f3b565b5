// sanm/trainer.cpp

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

#include "sanm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace sanm {

double noam_lr(long long step, const ScheduleConfig& cfg) {
  if (cfg.d_model < 1 || cfg.warmup < 1 || cfg.k <= 0.0) {
    throw ConfigError("schedule: d_model, warmup and k must be positive");
  }
  if (step < 1) throw ConfigError("schedule: step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup);
  return cfg.k / std::sqrt(static_cast<double>(cfg.d_model)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

LossResult label_smoothed_ce(const Tensor& logits, const std::vector<int>& targets,
                             double smoothing, int pad_id,
                             std::vector<double>* per_position) {
  if (logits.shape().size() != 2) {
    throw ShapeError("label_smoothed_ce: logits must be 2-D");
  }
  const int t_len = logits.rows(), vocab = logits.cols();
  if (static_cast<int>(targets.size()) != t_len) {
    throw ShapeError("label_smoothed_ce: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(t_len) + " logit rows");
  }
  if (vocab < 2) throw ShapeError("label_smoothed_ce: vocab must be >= 2");
  if (smoothing < 0.0 || smoothing >= 1.0) {
    throw ConfigError("label_smoothed_ce: smoothing must be in [0, 1)");
  }
  for (int id : targets) {
    if (id < 0 || id >= vocab) {
      throw DataError("label_smoothed_ce: target id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  int n_tokens = 0;
  for (int id : targets) n_tokens += (id != pad_id) ? 1 : 0;
  if (n_tokens == 0) {
    throw DataError("label_smoothed_ce: every target position is padding");
  }
  if (per_position) per_position->assign(t_len, 0.0);
  const double q_other = smoothing / (vocab - 1);
  const double q_gold = 1.0 - smoothing;
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(t_len) * vocab, 0.0);
  double total = 0.0;
  for (int t = 0; t < t_len; ++t) {
    if (targets[t] == pad_id) continue;
    const double* l = logits.data() + static_cast<size_t>(t) * vocab;
    double mx = l[0];
    for (int j = 1; j < vocab; ++j) mx = std::max(mx, l[j]);
    double sum_exp = 0.0, sum_l = 0.0;
    for (int j = 0; j < vocab; ++j) {
      sum_exp += std::exp(l[j] - mx);
      sum_l += l[j];
    }
    const double log_z = mx + std::log(sum_exp);
    double* p = probs->data() + static_cast<size_t>(t) * vocab;
    for (int j = 0; j < vocab; ++j) p[j] = std::exp(l[j] - log_z);
    const double gold = l[targets[t]];
    const double row_loss = log_z - q_gold * gold - q_other * (sum_l - gold);
    if (per_position) (*per_position)[t] = row_loss;
    total += row_loss;
  }
  Tensor loss = Tensor::scalar(total / n_tokens);
  if (GradTape::active() && logits.tracked()) {
    loss.set_tracked(true);
    auto li = logits.impl(), oi = loss.impl();
    const std::vector<int> tgt = targets;
    GradTape::active()->record([li, oi, probs, tgt, t_len, vocab, q_gold, q_other,
                                pad_id, n_tokens] {
      const double g = oi->grad[0] / n_tokens;
      for (int t = 0; t < t_len; ++t) {
        if (tgt[t] == pad_id) continue;
        const double* p = probs->data() + static_cast<size_t>(t) * vocab;
        double* gl = li->grad.data() + static_cast<size_t>(t) * vocab;
        for (int j = 0; j < vocab; ++j) {
          const double q = (j == tgt[t]) ? q_gold : q_other;
          gl[j] += g * (p[j] - q);
        }
      }
    });
  }
  return LossResult{loss, n_tokens};
}

OptimizerState init_adam(const std::vector<Tensor>& params) {
  OptimizerState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor& p : params) {
    state.m.push_back(Tensor::zeros(p.shape()));
    state.v.push_back(Tensor::zeros(p.shape()));
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, OptimizerState& state, double lr,
               const AdamConfig& cfg) {
  if (params.size() != state.m.size() || params.size() != state.v.size()) {
    throw ShapeError("adam: state does not match parameter list");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].tracked()) {
      throw ConfigError("adam: parameter " + std::to_string(i) + " has no gradient");
    }
    const double* g = params[i].grad();
    for (long long j = 0; j < params[i].numel(); ++j) {
      if (!std::isfinite(g[j])) {
        throw NumericError("adam: non-finite gradient in parameter " +
                           std::to_string(i) + "; step rejected");
      }
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const double* g = p.grad();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    double* w = p.data();
    for (long long j = 0; j < p.numel(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.epsilon);
    }
  }
}

double global_grad_norm(const std::vector<Tensor>& params) {
  double sum_sq = 0.0;
  for (const Tensor& p : params) {
    const double* g = p.grad();
    if (g == nullptr) continue;
    for (long long j = 0; j < p.numel(); ++j) sum_sq += g[j] * g[j];
  }
  return std::sqrt(sum_sq);
}

void clip_gradients(std::vector<Tensor>& params, double max_norm) {
  if (max_norm <= 0.0) throw ConfigError("clip: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (Tensor& p : params) {
    double* g = p.grad();
    if (g == nullptr) continue;
    for (long long j = 0; j < p.numel(); ++j) g[j] *= scale;
  }
}

TrainConfig train_config_from_kv(std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  auto take = [&kv](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto parse_ll = [](const char* key, const std::string& v) {
    try {
      size_t pos = 0;
      const long long out = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(std::string("config key ") + key + ": '" + v +
                        "' is not an integer");
    }
  };
  auto parse_d = [](const char* key, const std::string& v) {
    try {
      size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(std::string("config key ") + key + ": '" + v +
                        "' is not a number");
    }
  };
  if (std::string v = take("batch"); !v.empty()) {
    cfg.batch_utterances = static_cast<int>(parse_ll("batch", v));
  }
  if (std::string v = take("max_steps"); !v.empty()) cfg.max_steps = parse_ll("max_steps", v);
  if (std::string v = take("label_smoothing"); !v.empty()) {
    cfg.label_smoothing = parse_d("label_smoothing", v);
  }
  if (std::string v = take("train_dropout"); !v.empty()) cfg.dropout = parse_d("train_dropout", v);
  if (std::string v = take("seed"); !v.empty()) {
    cfg.seed = static_cast<uint64_t>(parse_ll("seed", v));
  }
  if (std::string v = take("checkpoint_every"); !v.empty()) {
    cfg.checkpoint_every = parse_ll("checkpoint_every", v);
  }
  if (std::string v = take("clip_norm"); !v.empty()) cfg.clip_norm = parse_d("clip_norm", v);
  if (std::string v = take("warmup"); !v.empty()) {
    cfg.schedule.warmup = static_cast<int>(parse_ll("warmup", v));
  }
  if (std::string v = take("schedule_d"); !v.empty()) {
    cfg.schedule.d_model = static_cast<int>(parse_ll("schedule_d", v));
  }
  if (std::string v = take("schedule_k"); !v.empty()) cfg.schedule.k = parse_d("schedule_k", v);
  if (std::string v = take("log_every"); !v.empty()) cfg.log_every = parse_ll("log_every", v);
  return cfg;
}

namespace {

struct PreparedUtterance {
  Tensor feats;                 // LFR-stacked, normalized
  std::vector<int> target_in;   // BOS + gold ids
  std::vector<int> target_out;  // gold ids + EOS
};

void save_train_checkpoint(const std::string& path, const ModelConfig& cfg,
                           ModelParams& params, const std::vector<std::string>& names,
                           const std::vector<Tensor>& plist, OptimizerState& state) {
  std::vector<std::pair<std::string, Tensor>> extra;
  extra.emplace_back("adam.step",
                     Tensor::scalar(static_cast<double>(state.step)));
  for (size_t i = 0; i < plist.size(); ++i) {
    extra.emplace_back("adam.m." + names[i], state.m[i]);
    extra.emplace_back("adam.v." + names[i], state.v[i]);
  }
  save_checkpoint(path, cfg, params, extra);
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const std::vector<Utterance>& corpus,
                  const TrainConfig& train_cfg, const std::string& out_dir) {
  validate(model_cfg);
  if (corpus.empty()) throw ConfigError("train: empty corpus");
  if (train_cfg.batch_utterances < 1) throw ConfigError("train: batch must be >= 1");
  if (train_cfg.max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  if (train_cfg.label_smoothing < 0.0 || train_cfg.label_smoothing >= 1.0) {
    throw ConfigError("train: label_smoothing must be in [0, 1)");
  }
  if (train_cfg.dropout < 0.0 || train_cfg.dropout >= 1.0) {
    throw ConfigError("train: dropout must be in [0, 1)");
  }
  std::filesystem::create_directories(out_dir);

  const Vocabulary vocab(model_cfg.vocab_size - Vocabulary::kReserved);
  FeatureSpec spec;
  spec.base_dim = corpus[0].feats.cols();
  if (spec.stacked_dim() != model_cfg.feat_dim) {
    throw ConfigError("train: stacked feature width " +
                      std::to_string(spec.stacked_dim()) +
                      " does not match feat_dim " +
                      std::to_string(model_cfg.feat_dim));
  }
  std::vector<PreparedUtterance> data;
  data.reserve(corpus.size());
  for (const Utterance& utt : corpus) {
    PreparedUtterance prep;
    prep.feats = lfr_stack(mvn(utt.feats), spec);
    prep.target_in.push_back(Vocabulary::kBos);
    for (int tok : utt.tokens) {
      const int id = vocab.token_to_id(tok);
      prep.target_in.push_back(id);
      prep.target_out.push_back(id);
    }
    prep.target_out.push_back(Vocabulary::kEos);
    data.push_back(std::move(prep));
  }

  ModelParams params = build_model(model_cfg, train_cfg.seed);
  std::vector<std::string> names;
  std::vector<Tensor> plist;
  visit_params(params, model_cfg, [&](const std::string& name, Tensor& t) {
    names.push_back(name);
    t.set_tracked(true);
    plist.push_back(t);
  });
  OptimizerState state = init_adam(plist);

  // separate streams so batch order never shifts the dropout noise
  Rng order_rng(train_cfg.seed * 0x9e3779b97f4a7c15ull + 1);
  Rng dropout_rng(train_cfg.seed * 0x9e3779b97f4a7c15ull + 2);

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // forces a shuffle before the first batch
  auto reshuffle = [&] {
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<size_t>(order_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    // mild length bucketing: sort shuffle windows by frame count
    const size_t window = static_cast<size_t>(train_cfg.batch_utterances) * 4;
    for (size_t start = 0; start < order.size(); start += window) {
      const size_t stop = std::min(order.size(), start + window);
      std::stable_sort(order.begin() + static_cast<long>(start),
                       order.begin() + static_cast<long>(stop),
                       [&data](int a, int b) {
                         return data[static_cast<size_t>(a)].feats.rows() <
                                data[static_cast<size_t>(b)].feats.rows();
                       });
    }
    cursor = 0;
  };

  TrainResult result;
  result.checkpoint_path = out_dir + "/checkpoint-final.bin";
  result.metrics_path = out_dir + "/metrics.log";
  const auto t_start = std::chrono::steady_clock::now();
  long long tokens_done = 0;

  for (long long step = 1; step <= train_cfg.max_steps; ++step) {
    GradTape tape;
    double loss_value = 0.0;
    {
      GradTape::Scope scope(tape);
      Tensor weighted_sum;
      int batch_tokens = 0;
      for (int b = 0; b < train_cfg.batch_utterances; ++b) {
        if (cursor >= order.size()) reshuffle();
        const PreparedUtterance& utt = data[static_cast<size_t>(order[cursor++])];
        ForwardOptions opt;
        opt.dropout = train_cfg.dropout;
        opt.rng = &dropout_rng;
        Tensor z = encoder_forward(utt.feats, utt.feats.rows(), params, model_cfg, opt);
        Tensor logits = decoder_forward(z, z.rows(), utt.target_in, params, model_cfg, opt);
        LossResult lr_res = label_smoothed_ce(logits, utt.target_out,
                                              train_cfg.label_smoothing,
                                              Vocabulary::kPad);
        Tensor contrib = scale(lr_res.loss, static_cast<double>(lr_res.tokens));
        weighted_sum = weighted_sum.defined() ? add(weighted_sum, contrib) : contrib;
        batch_tokens += lr_res.tokens;
      }
      Tensor batch_loss = scale(weighted_sum, 1.0 / batch_tokens);
      loss_value = batch_loss.value();
      tokens_done += batch_tokens;
      if (!std::isfinite(loss_value)) {
        result.diverged = true;
      } else {
        tape.backward(batch_loss);
      }
    }
    double grad_norm = 0.0;
    if (!result.diverged) {
      grad_norm = global_grad_norm(plist);
      if (!std::isfinite(grad_norm)) result.diverged = true;
    }
    if (result.diverged) {
      // keep the params from the last completed step
      std::fprintf(stderr, "train: non-finite loss or gradient at step %lld; stopping\n",
                   step);
      break;
    }
    clip_gradients(plist, train_cfg.clip_norm);
    const double lr = noam_lr(step, train_cfg.schedule);
    adam_step(plist, state, lr);
    for (Tensor& p : plist) p.zero_grad();
    result.metrics.push_back({step, loss_value, lr, grad_norm});

    if (train_cfg.log_every > 0 && step % train_cfg.log_every == 0) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      std::printf("step %lld loss %.6f lr %.3e grad_norm %.3f tokens/s %.0f\n", step,
                  loss_value, lr, grad_norm,
                  elapsed > 0.0 ? tokens_done / elapsed : 0.0);
      std::fflush(stdout);
    }
    if (train_cfg.checkpoint_every > 0 && step % train_cfg.checkpoint_every == 0) {
      save_train_checkpoint(out_dir + "/checkpoint-" + std::to_string(step) + ".bin",
                            model_cfg, params, names, plist, state);
    }
  }

  // On divergence the failed update never ran, so the live params are still
  // the ones from the last completed step.
  save_train_checkpoint(result.checkpoint_path, model_cfg, params, names, plist, state);

  std::ofstream metrics(result.metrics_path, std::ios::trunc);
  if (!metrics) throw DataError("train: cannot write '" + result.metrics_path + "'");
  metrics << "# step loss lr grad_norm\n";
  char line[160];
  for (const MetricsRecord& rec : result.metrics) {
    std::snprintf(line, sizeof(line), "%lld %.17g %.17g %.17g\n", rec.step, rec.loss,
                  rec.lr, rec.grad_norm);
    metrics << line;
  }
  metrics.flush();
  if (!metrics) throw DataError("train: write to '" + result.metrics_path + "' failed");
  return result;
}

}  // namespace sanm
