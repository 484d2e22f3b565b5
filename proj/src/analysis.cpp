// sanm/analysis.cpp

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

#include "sanm/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "sanm/memory.hpp"
#include "sanm/sanm_layer.hpp"

namespace sanm {

std::vector<int> greedy_decode(const Tensor& z, const ModelParams& params,
                               const ModelConfig& cfg, int max_len) {
  if (max_len <= 0) {
    throw ConfigError("greedy_decode: max_len must be positive, got " +
                      std::to_string(max_len));
  }
  std::vector<int> ids = {Vocabulary::kBos};
  std::vector<int> hyp;
  for (int step = 0; step < max_len; ++step) {
    Tensor logits = decoder_forward(z, z.rows(), ids, params, cfg);
    const int last = logits.rows() - 1;
    int best = 0;
    double best_value = logits.at(last, 0);
    for (int j = 1; j < logits.cols(); ++j) {
      if (logits.at(last, j) > best_value) {
        best_value = logits.at(last, j);
        best = j;
      }
    }
    if (best == Vocabulary::kEos) break;
    hyp.push_back(best);
    ids.push_back(best);
  }
  return hyp;
}

double cer(const std::vector<int>& hyp, const std::vector<int>& ref) {
  if (ref.empty()) throw DataError("cer: empty reference");
  const size_t n = hyp.size();
  const size_t m = ref.size();
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      const size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(m);
}

void write_pgm(const std::string& path, const Tensor& m) {
  if (m.shape().size() != 2) {
    throw ShapeError("write_pgm: need a matrix, got " + m.shape_str());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("write_pgm: cannot write '" + path + "'");
  double top = 0.0;
  for (long long i = 0; i < m.numel(); ++i) top = std::max(top, m[i]);
  const double scale = top > 0.0 ? 255.0 / top : 0.0;
  out << "P2\n" << m.cols() << " " << m.rows() << "\n255\n";
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      const double v = std::clamp(m.at(r, c) * scale, 0.0, 255.0);
      out << static_cast<int>(std::lround(v)) << (c + 1 == m.cols() ? '\n' : ' ');
    }
  }
  out.flush();
  if (!out) throw DataError("write_pgm: write to '" + path + "' failed");
}

void write_csv(const std::string& path, const Tensor& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("write_csv: cannot write '" + path + "'");
  const int c_count = m.shape().size() > 1 ? m.cols() : 1;
  const int r_count = static_cast<int>(m.numel()) / c_count;
  char cell[64];
  for (int r = 0; r < r_count; ++r) {
    for (int c = 0; c < c_count; ++c) {
      std::snprintf(cell, sizeof(cell), "%.17g",
                    m[static_cast<long long>(r) * c_count + c]);
      out << cell << (c + 1 == c_count ? '\n' : ',');
    }
  }
  out.flush();
  if (!out) throw DataError("write_csv: write to '" + path + "' failed");
}

Tensor read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_csv: cannot open '" + path + "'");
  std::vector<double> data;
  int cols = -1;
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int this_cols = 0;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string field = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) {
        throw DataError("read_csv: '" + path + "' line " +
                        std::to_string(rows + 1) + ": bad number '" + field + "'");
      }
      data.push_back(v);
      ++this_cols;
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (cols < 0) {
      cols = this_cols;
    } else if (cols != this_cols) {
      throw DataError("read_csv: '" + path + "' line " + std::to_string(rows + 1) +
                      ": expected " + std::to_string(cols) + " fields, got " +
                      std::to_string(this_cols));
    }
    ++rows;
  }
  if (rows == 0) throw DataError("read_csv: '" + path + "' is empty");
  if (cols == 1) return Tensor::from_data({rows}, std::move(data));
  return Tensor::from_data({rows, cols}, std::move(data));
}

namespace {

// Appends the taps CSV for one basic sub-layer when it has a memory branch.
void dump_taps(const BasicSublayerParams& p, const MemoryConfig& mem,
               const std::string& dir, const std::string& name,
               AnalysisDump& dump, std::ostream& manifest) {
  Tensor taps;
  if (p.kind == SublayerKind::kDfsmn) {
    taps = average_filter(p.dfsmn.fir, mem);
  } else if (p.kind == SublayerKind::kSanm) {
    taps = average_filter(p.sanm.fir, p.sanm.mem_cfg);
  } else {
    return;
  }
  const std::string path = dir + "/" + name + ".taps.csv";
  write_csv(path, taps);
  dump.files.push_back(path);
  manifest << "taps " << name << " " << taps.numel() << "\n";
}

}  // namespace

AnalysisDump dump_analysis(const ModelParams& params, const ModelConfig& cfg,
                           const Utterance& utt, const FeatureSpec& spec,
                           const std::string& out_dir) {
  validate(cfg);
  std::filesystem::create_directories(out_dir);
  Tensor feats = lfr_stack(mvn(utt.feats), spec);
  if (feats.cols() != cfg.feat_dim) {
    throw ShapeError("dump_analysis: stacked width " +
                     std::to_string(feats.cols()) + " does not match feat_dim " +
                     std::to_string(cfg.feat_dim));
  }
  Vocabulary vocab(cfg.vocab_size - Vocabulary::kReserved);
  std::vector<int> target_in = {Vocabulary::kBos};
  for (int tok : utt.tokens) target_in.push_back(vocab.token_to_id(tok));

  ForwardRecorder rec;
  ForwardOptions opt;
  opt.recorder = &rec;
  Tensor z = encoder_forward(feats, feats.rows(), params, cfg, opt);
  decoder_forward(z, z.rows(), target_in, params, cfg, opt);

  AnalysisDump dump;
  const std::string manifest_path = out_dir + "/manifest.txt";
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) {
    throw DataError("dump_analysis: cannot write '" + manifest_path + "'");
  }
  manifest << "utterance " << utt.id << "\n";
  dump.files.push_back(manifest_path);

  for (const LayerRecord& layer : rec.attention) {
    const std::string stem = out_dir + "/" + layer.name;
    write_csv(stem + ".csv", layer.weights);
    write_pgm(stem + ".pgm", layer.weights);
    dump.files.push_back(stem + ".csv");
    dump.files.push_back(stem + ".pgm");
    manifest << "attention " << layer.name << " " << layer.weights.rows() << "x"
             << layer.weights.cols() << "\n";
  }
  for (size_t i = 0; i < params.encoder.size(); ++i) {
    dump_taps(params.encoder[i].basic, cfg.enc_mem, out_dir,
              "encoder." + std::to_string(i), dump, manifest);
  }
  for (size_t i = 0; i < params.decoder.size(); ++i) {
    dump_taps(params.decoder[i].basic, cfg.dec_mem, out_dir,
              "decoder." + std::to_string(i), dump, manifest);
  }
  manifest.flush();
  if (!manifest) {
    throw DataError("dump_analysis: write to '" + manifest_path + "' failed");
  }
  return dump;
}

namespace {

double elapsed_seconds(const std::function<void()>& fn, int inner) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < inner; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

double median_call_time(const std::function<void()>& fn, int reps) {
  // Loop until a sample is long enough for the clock, then time reps samples.
  constexpr double kMinSample = 1e-3;
  int inner = 1;
  double total = elapsed_seconds(fn, inner);
  while (total < kMinSample && inner < (1 << 20)) {
    inner *= 2;
    total = elapsed_seconds(fn, inner);
  }
  std::vector<double> samples(static_cast<size_t>(reps));
  for (double& s : samples) s = elapsed_seconds(fn, inner) / inner;
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

void randomize(Tensor& t, Rng& rng) {
  for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.5, 0.5);
}

}  // namespace

BenchReport bench_scaling(const std::vector<SublayerKind>& kinds,
                          const std::vector<int>& lengths, int d, int reps) {
  if (kinds.empty()) throw ConfigError("bench: no sub-layer kinds given");
  if (lengths.size() < 2) {
    throw ConfigError("bench: need at least two lengths for a slope");
  }
  for (size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1 || (i > 0 && lengths[i] <= lengths[i - 1])) {
      throw ConfigError("bench: lengths must be positive and strictly increasing");
    }
  }
  if (reps < 5) throw ConfigError("bench: reps must be at least 5");
  if (d < 1) throw ConfigError("bench: d must be positive");

  Rng rng(7);
  const AttentionConfig acfg{d, 1, d, d};
  const MemoryConfig mem{d, 10, 10, 1, 1};
  AttentionParams attn = init_attention_params(acfg, rng);
  DfsmnLayerParams dfsmn = init_dfsmn_params(mem, d, rng);
  randomize(dfsmn.fir.a, rng);
  randomize(dfsmn.fir.c, rng);
  SanmParams sanm = init_sanm_params(acfg, mem, rng);
  randomize(sanm.fir.a, rng);
  randomize(sanm.fir.c, rng);

  BenchReport report;
  for (SublayerKind kind : kinds) {
    BenchSeries series;
    series.kind = kind;
    for (int n : lengths) {
      Tensor x = Tensor::normal({n, d}, rng, 0.0, 1.0);
      std::function<void()> fn;
      switch (kind) {
        case SublayerKind::kSan:
          fn = [&] { multi_head(x, x, acfg, attn, AttentionMask::none()); };
          break;
        case SublayerKind::kDfsmn:
          fn = [&] { dfsmn_layer(x, dfsmn, mem); };
          break;
        case SublayerKind::kSanm:
          fn = [&] { sanm_layer(x, acfg, sanm, AttentionMask::none()); };
          break;
      }
      series.points.push_back({n, median_call_time(fn, reps)});
    }
    // least squares on (log n, log t)
    const size_t count = series.points.size();
    double mx = 0.0, my = 0.0;
    for (const BenchPoint& p : series.points) {
      mx += std::log(static_cast<double>(p.length));
      my += std::log(p.median_seconds);
    }
    mx /= static_cast<double>(count);
    my /= static_cast<double>(count);
    double sxy = 0.0, sxx = 0.0;
    for (const BenchPoint& p : series.points) {
      const double dx = std::log(static_cast<double>(p.length)) - mx;
      sxy += dx * (std::log(p.median_seconds) - my);
      sxx += dx * dx;
    }
    series.slope = sxy / sxx;
    report.series.push_back(std::move(series));
  }
  return report;
}

}  // namespace sanm
