// sanm/frontend.cpp

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

#include "sanm/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"

namespace sanm {

Tensor lfr_stack(const Tensor& frames, const FeatureSpec& spec) {
  if (spec.base_dim < 1 || spec.left < 0 || spec.right < 0 || spec.hop < 1) {
    throw ConfigError("lfr_stack: invalid feature spec");
  }
  if (frames.shape().size() != 2 || frames.cols() != spec.base_dim) {
    throw ShapeError("lfr_stack: frames " + frames.shape_str() +
                     " do not match base_dim " + std::to_string(spec.base_dim));
  }
  const int t_base = frames.rows();
  const int t_out = spec.output_length(t_base);
  const int window = spec.left + 1 + spec.right;
  Tensor out = Tensor::zeros({t_out, window * spec.base_dim});
  for (int k = 0; k < t_out; ++k) {
    const int center = spec.hop * k;
    for (int w = 0; w < window; ++w) {
      const int src = std::clamp(center - spec.left + w, 0, t_base - 1);
      std::copy(frames.data() + static_cast<size_t>(src) * spec.base_dim,
                frames.data() + static_cast<size_t>(src + 1) * spec.base_dim,
                out.data() + static_cast<size_t>(k) * window * spec.base_dim +
                    static_cast<size_t>(w) * spec.base_dim);
    }
  }
  return out;
}

Tensor mvn(const Tensor& feats) {
  if (feats.shape().size() != 2) throw ShapeError("mvn: need a 2-D feature matrix");
  const int t_len = feats.rows(), d = feats.cols();
  Tensor out = Tensor::zeros({t_len, d});
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int t = 0; t < t_len; ++t) mean += feats.at(t, j);
    mean /= t_len;
    double var = 0.0;
    for (int t = 0; t < t_len; ++t) {
      var += (feats.at(t, j) - mean) * (feats.at(t, j) - mean);
    }
    // guard keeps constant dimensions (e.g. noiseless templates) finite
    const double inv_std = 1.0 / (std::sqrt(var / t_len) + 1e-8);
    for (int t = 0; t < t_len; ++t) out.at(t, j) = (feats.at(t, j) - mean) * inv_std;
  }
  return out;
}

void validate(const SyntheticTask& task) {
  if (task.alphabet < 1) throw ConfigError("synthetic task: alphabet must be >= 1");
  if (task.min_tokens < 1 || task.max_tokens < task.min_tokens) {
    throw ConfigError("synthetic task: bad tokens-per-utterance range");
  }
  if (task.min_frames < 1 || task.max_frames < task.min_frames) {
    throw ConfigError("synthetic task: every token needs >= 1 frame");
  }
  if (task.noise < 0.0) throw ConfigError("synthetic task: noise must be >= 0");
  if (task.base_dim < 1) throw ConfigError("synthetic task: base_dim must be >= 1");
}

namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Templates depend only on the task's template seed, never on the utterance.
Tensor token_templates(const SyntheticTask& task) {
  Rng rng(task.template_seed);
  Tensor templates = Tensor::zeros({task.alphabet, task.base_dim});
  for (long long i = 0; i < templates.numel(); ++i) {
    templates[i] = to_f32(rng.uniform(-1.0, 1.0));
  }
  return templates;
}

}  // namespace

Utterance generate_utterance(const SyntheticTask& task, uint64_t seed) {
  validate(task);
  const Tensor templates = token_templates(task);
  Rng rng(seed);
  Utterance utt;
  utt.id = "utt-" + std::to_string(seed);
  const int n_tokens = rng.uniform_int(task.min_tokens, task.max_tokens);
  std::vector<int> durations(n_tokens);
  int total = 0;
  for (int i = 0; i < n_tokens; ++i) {
    utt.tokens.push_back(rng.uniform_int(0, task.alphabet - 1));
    durations[i] = rng.uniform_int(task.min_frames, task.max_frames);
    total += durations[i];
  }
  utt.feats = Tensor::zeros({total, task.base_dim});
  int row = 0;
  for (int i = 0; i < n_tokens; ++i) {
    const double* tmpl = templates.data() +
                         static_cast<size_t>(utt.tokens[i]) * task.base_dim;
    for (int f = 0; f < durations[i]; ++f, ++row) {
      double* dst = utt.feats.data() + static_cast<size_t>(row) * task.base_dim;
      for (int j = 0; j < task.base_dim; ++j) {
        dst[j] = task.noise > 0.0
                     ? to_f32(tmpl[j] + task.noise * rng.normal())
                     : tmpl[j];
      }
    }
  }
  return utt;
}

std::vector<Utterance> generate_corpus(const SyntheticTask& task,
                                       uint64_t base_seed, int count,
                                       const std::string& prefix) {
  if (count < 0) throw ConfigError("generate_corpus: count must be >= 0");
  std::vector<Utterance> utts;
  utts.reserve(count);
  for (int i = 0; i < count; ++i) {
    Utterance utt = generate_utterance(task, base_seed + static_cast<uint64_t>(i));
    utt.id = prefix + "-" + std::to_string(i);
    utts.push_back(std::move(utt));
  }
  return utts;
}

namespace {

constexpr char kCorpusMagic[] = "SANMCORP";
constexpr uint32_t kCorpusVersion = 1;

}  // namespace

void write_corpus(const std::string& path, const std::vector<Utterance>& utts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("corpus: cannot open '" + path + "' for writing");
  out.write(kCorpusMagic, 8);
  io::write_u32(out, kCorpusVersion);
  io::write_u32(out, static_cast<uint32_t>(utts.size()));
  std::vector<float> f32_buf;
  for (const Utterance& utt : utts) {
    io::write_string(out, utt.id);
    io::write_u32(out, static_cast<uint32_t>(utt.feats.rows()));
    io::write_u32(out, static_cast<uint32_t>(utt.feats.cols()));
    io::write_u32(out, static_cast<uint32_t>(utt.tokens.size()));
    f32_buf.resize(static_cast<size_t>(utt.feats.numel()));
    for (long long i = 0; i < utt.feats.numel(); ++i) {
      f32_buf[static_cast<size_t>(i)] = static_cast<float>(utt.feats[i]);
    }
    io::write_raw(out, f32_buf.data(), sizeof(float) * f32_buf.size());
    for (int tok : utt.tokens) {
      io::write_u32(out, static_cast<uint32_t>(tok));
    }
  }
  out.flush();
  if (!out) throw DataError("corpus: write to '" + path + "' failed");
}

std::vector<Utterance> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("corpus: cannot open '" + path + "'");
  io::Reader r(in, path);
  r.expect_magic(kCorpusMagic, "corpus");
  const uint32_t version = r.u32("version");
  if (version != kCorpusVersion) {
    throw DataError("corpus: unsupported version " + std::to_string(version));
  }
  const uint32_t count = r.u32("utterance count");
  std::vector<Utterance> utts;
  utts.reserve(count);
  for (uint32_t u = 0; u < count; ++u) {
    const std::string where = "utterance " + std::to_string(u);
    Utterance utt;
    utt.id = r.str("id of " + where);
    const uint32_t t_len = r.u32("frame count of " + where);
    const uint32_t dim = r.u32("feature width of " + where);
    const uint32_t n_tokens = r.u32("token count of " + where);
    if (t_len == 0 || dim == 0 || t_len > (1u << 24) || dim > (1u << 16)) {
      throw DataError(path + ": implausible dimensions " + std::to_string(t_len) +
                      "x" + std::to_string(dim) + " for " + where +
                      " at byte offset " + std::to_string(r.offset()));
    }
    std::vector<float> f32_buf(static_cast<size_t>(t_len) * dim);
    r.bytes(f32_buf.data(), sizeof(float) * f32_buf.size(),
            "feature payload of " + where);
    std::vector<double> data(f32_buf.begin(), f32_buf.end());
    utt.feats = Tensor::from_data({static_cast<int>(t_len), static_cast<int>(dim)},
                                  std::move(data));
    utt.tokens.reserve(n_tokens);
    for (uint32_t i = 0; i < n_tokens; ++i) {
      utt.tokens.push_back(static_cast<int>(r.u32("token ids of " + where)));
    }
    utts.push_back(std::move(utt));
  }
  return utts;
}

}  // namespace sanm
