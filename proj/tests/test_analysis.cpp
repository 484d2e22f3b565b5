// tests/test_analysis.cpp

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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sanm/analysis.hpp"
#include "sanm/frontend.hpp"
#include "sanm/trainer.hpp"

using namespace sanm;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.encoder_kind = SublayerKind::kSanm;
  cfg.decoder_kind = SublayerKind::kSanm;
  cfg.n = 1;
  cfg.m = 1;
  cfg.k = 0;
  cfg.d_basic = 16;
  cfg.d_ffn = 32;
  cfg.h = 2;
  cfg.feat_dim = 56;
  cfg.vocab_size = 4 + Vocabulary::kReserved;
  cfg.enc_mem = MemoryConfig{16, 2, 2, 1, 1};
  cfg.dec_mem = MemoryConfig{16, 2, 0, 1, 1};
  cfg.dropout = 0.0;
  return cfg;
}

SyntheticTask toy_task() {
  SyntheticTask task;
  task.alphabet = 4;
  task.min_tokens = 2;
  task.max_tokens = 4;
  task.min_frames = 6;
  task.max_frames = 10;
  task.base_dim = 8;
  return task;
}

FeatureSpec toy_spec() {
  FeatureSpec spec;
  spec.base_dim = 8;
  return spec;
}

Tensor prepare(const Utterance& utt, const FeatureSpec& spec) {
  return lfr_stack(mvn(utt.feats), spec);
}

bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

}  // namespace

TEST_CASE("greedy decode termination and tie breaking") {
  ModelConfig cfg = toy_config();
  ModelParams params = build_model(cfg, 3);
  Rng rng(5);
  Tensor z = Tensor::uniform({4, cfg.d_basic}, rng, -1.0, 1.0);

  SUBCASE("a model that always prefers EOS emits nothing") {
    params.output.w2 = Tensor::zeros({cfg.d_ffn, cfg.vocab_size});
    params.output.b2 = Tensor::zeros({cfg.vocab_size});
    params.output.b2[Vocabulary::kEos] = 10.0;
    CHECK(greedy_decode(z, params, cfg, 16).empty());
  }

  SUBCASE("a model that never prefers EOS stops at max_len") {
    params.output.w2 = Tensor::zeros({cfg.d_ffn, cfg.vocab_size});
    params.output.b2 = Tensor::zeros({cfg.vocab_size});
    params.output.b2[5] = 10.0;
    std::vector<int> hyp = greedy_decode(z, params, cfg, 7);
    REQUIRE(hyp.size() == 7);
    for (int id : hyp) CHECK(id == 5);
  }

  SUBCASE("argmax ties break toward the lowest id") {
    // Constant logits: every id is tied, so every step emits id 0.
    params.output.w2 = Tensor::zeros({cfg.d_ffn, cfg.vocab_size});
    params.output.b2 = Tensor::zeros({cfg.vocab_size});
    std::vector<int> hyp = greedy_decode(z, params, cfg, 3);
    REQUIRE(hyp.size() == 3);
    for (int id : hyp) CHECK(id == 0);
  }

  SUBCASE("decoding is deterministic") {
    std::vector<int> a = greedy_decode(z, params, cfg, 12);
    std::vector<int> b = greedy_decode(z, params, cfg, 12);
    CHECK(a == b);
  }

  SUBCASE("max_len must be positive") {
    CHECK_THROWS_AS(greedy_decode(z, params, cfg, 0), ConfigError);
    CHECK_THROWS_AS(greedy_decode(z, params, cfg, -3), ConfigError);
  }
}

TEST_CASE("character error rate") {
  CHECK(cer({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(cer({}, {1, 2, 3, 4, 5}) == 1.0);
  // Two substitutions in four characters.
  CHECK(cer({7, 9, 8, 4}, {7, 5, 8, 6}) == 0.5);
  // Rates above 1 are possible when the hypothesis is much longer.
  CHECK(cer({1, 1, 1, 1}, {2}) == 4.0);
  CHECK_THROWS_AS(cer({1}, {}), DataError);

  // Exhaustive small cases against the full-table reference.
  std::vector<std::vector<int>> strings = {{}};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : strings) {
      if (static_cast<int>(s.size()) == len - 1) {
        for (int c = 0; c < 2; ++c) {
          std::vector<int> t = s;
          t.push_back(c);
          next.push_back(t);
        }
      }
    }
    strings.insert(strings.end(), next.begin(), next.end());
  }
  for (const auto& hyp : strings) {
    for (const auto& ref : strings) {
      if (ref.empty()) continue;
      const double expect = static_cast<double>(oracle::levenshtein(hyp, ref)) /
                            static_cast<double>(ref.size());
      CHECK(cer(hyp, ref) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("csv round trip and error handling") {
  const std::string path = "/tmp/sanm_test_roundtrip.csv";
  Rng rng(7);
  Tensor m = Tensor::uniform({3, 4}, rng, -5.0, 5.0);
  m[0] = 1.0 / 3.0;  // needs all 17 digits
  write_csv(path, m);
  Tensor back = read_csv(path);
  REQUIRE(back.shape() == m.shape());
  for (long long i = 0; i < m.numel(); ++i) CHECK(back[i] == m[i]);

  Tensor v = Tensor::from_data({5}, {1, 2, 3, 4, 5});
  write_csv(path, v);
  Tensor vback = read_csv(path);
  REQUIRE(vback.shape() == std::vector<int>{5});
  for (int i = 0; i < 5; ++i) CHECK(vback[i] == v[i]);

  std::ofstream(path, std::ios::trunc) << "";
  CHECK_THROWS_AS(read_csv(path), DataError);
  std::ofstream(path, std::ios::trunc) << "1,2\n3\n";
  CHECK_THROWS_AS(read_csv(path), DataError);
  std::ofstream(path, std::ios::trunc) << "1,oops\n";
  CHECK_THROWS_AS(read_csv(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("pgm rendering is a valid P2 file spanning the gray range") {
  const std::string path = "/tmp/sanm_test_render.pgm";
  Tensor m = Tensor::from_data({2, 3}, {0.0, 0.25, 0.5, 0.75, 1.0, 0.5});
  write_pgm(path, m);
  std::ifstream in(path);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  CHECK(magic == "P2");
  CHECK(width == 3);
  CHECK(height == 2);
  CHECK(maxval == 255);
  std::vector<int> pixels;
  int px = 0;
  while (in >> px) pixels.push_back(px);
  REQUIRE(pixels.size() == 6);
  for (int p : pixels) {
    CHECK(p >= 0);
    CHECK(p <= 255);
  }
  CHECK(pixels[0] == 0);    // matrix minimum of 0
  CHECK(pixels[4] == 255);  // matrix maximum maps to white
  std::filesystem::remove(path);
}

TEST_CASE("analysis dump writes a manifest, attention maps and tap summaries") {
  const std::string out_dir = "/tmp/sanm_test_dump";
  std::filesystem::remove_all(out_dir);
  ModelConfig cfg = toy_config();
  ModelParams params = build_model(cfg, 9);
  Utterance utt = generate_utterance(toy_task(), 50);
  utt.id = "dump-check";

  AnalysisDump dump = dump_analysis(params, cfg, utt, toy_spec(), out_dir);
  REQUIRE(!dump.files.empty());
  CHECK(dump.files[0] == out_dir + "/manifest.txt");
  for (const std::string& f : dump.files) CHECK(file_exists(f));

  // sanm encoder and decoder: attention everywhere, taps everywhere.
  CHECK(file_exists(out_dir + "/encoder.0.basic.csv"));
  CHECK(file_exists(out_dir + "/encoder.0.basic.pgm"));
  CHECK(file_exists(out_dir + "/decoder.0.self.csv"));
  CHECK(file_exists(out_dir + "/decoder.0.cross.csv"));
  CHECK(file_exists(out_dir + "/encoder.0.taps.csv"));
  CHECK(file_exists(out_dir + "/decoder.0.taps.csv"));

  const std::string manifest = [&] {
    std::ifstream in(out_dir + "/manifest.txt");
    std::string all, line;
    while (std::getline(in, line)) all += line + "\n";
    return all;
  }();
  CHECK(manifest.find("utterance dump-check") != std::string::npos);
  CHECK(manifest.find("attention encoder.0.basic") != std::string::npos);
  CHECK(manifest.find("taps encoder.0") != std::string::npos);

  // Attention CSVs hold row-stochastic matrices.
  const int t_enc = toy_spec().output_length(utt.feats.rows());
  Tensor enc = read_csv(out_dir + "/encoder.0.basic.csv");
  REQUIRE(enc.rows() == t_enc);
  REQUIRE(enc.cols() == t_enc);
  for (int r = 0; r < enc.rows(); ++r) {
    double total = 0.0;
    for (int c = 0; c < enc.cols(); ++c) total += enc.at(r, c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }

  // The decoder self map must be causal: zero above the diagonal.
  Tensor self = read_csv(out_dir + "/decoder.0.self.csv");
  const int t_dec = static_cast<int>(utt.tokens.size()) + 1;  // BOS + tokens
  REQUIRE(self.rows() == t_dec);
  REQUIRE(self.cols() == t_dec);
  for (int r = 0; r < t_dec; ++r) {
    for (int c = r + 1; c < t_dec; ++c) CHECK(self.at(r, c) == 0.0);
  }

  // Cross map: decoder rows attend over encoder frames.
  Tensor cross = read_csv(out_dir + "/decoder.0.cross.csv");
  CHECK(cross.rows() == t_dec);
  CHECK(cross.cols() == t_enc);

  // Tap summaries carry one entry per tap including the center.
  Tensor enc_taps = read_csv(out_dir + "/encoder.0.taps.csv");
  CHECK(enc_taps.numel() == cfg.enc_mem.n1 + cfg.enc_mem.n2 + 1);
  Tensor dec_taps = read_csv(out_dir + "/decoder.0.taps.csv");
  CHECK(dec_taps.numel() == cfg.dec_mem.n1 + cfg.dec_mem.n2 + 1);
  // Fresh models have zero taps, so only the center passthrough shows.
  CHECK(enc_taps[cfg.enc_mem.n1] == 1.0);

  // Feature width mismatches are rejected up front.
  FeatureSpec bad = toy_spec();
  bad.base_dim = 5;
  CHECK_THROWS_AS(dump_analysis(params, cfg, utt, bad, out_dir), ShapeError);
  std::filesystem::remove_all(out_dir);
}

TEST_CASE("a trained toy model transcribes its training utterances") {
  const std::string out_dir = "/tmp/sanm_test_trained_analysis";
  std::filesystem::remove_all(out_dir);
  ModelConfig cfg = toy_config();
  std::vector<Utterance> corpus = generate_corpus(toy_task(), 100, 40, "train");
  TrainConfig tc;
  tc.batch_utterances = 4;
  tc.max_steps = 1500;
  tc.label_smoothing = 0.0;
  tc.dropout = 0.0;
  tc.seed = 13;
  tc.schedule.d_model = 16;
  tc.schedule.warmup = 400;
  TrainResult result = train(cfg, corpus, tc, out_dir);
  REQUIRE(!result.diverged);

  Checkpoint ckpt = load_checkpoint(result.checkpoint_path);
  Vocabulary vocab(toy_task().alphabet);
  int perfect = 0;
  const int n_eval = 8;
  for (int i = 0; i < n_eval; ++i) {
    const Utterance& utt = corpus[static_cast<size_t>(i)];
    Tensor feats = prepare(utt, toy_spec());
    Tensor z = encoder_forward(feats, feats.rows(), ckpt.params, ckpt.cfg);
    std::vector<int> hyp = greedy_decode(z, ckpt.params, ckpt.cfg, 16);
    std::vector<int> ref;
    for (int tok : utt.tokens) ref.push_back(vocab.token_to_id(tok));
    if (cer(hyp, ref) == 0.0) ++perfect;
  }
  // Memorization of a four-symbol corpus: expect essentially every utterance.
  CHECK(perfect >= n_eval - 1);

  // The trained dump keeps all structural invariants.
  const std::string dump_dir = out_dir + "/dump";
  AnalysisDump dump =
      dump_analysis(ckpt.params, ckpt.cfg, corpus[0], toy_spec(), dump_dir);
  CHECK(!dump.files.empty());
  Tensor enc = read_csv(dump_dir + "/encoder.0.basic.csv");
  for (int r = 0; r < enc.rows(); ++r) {
    double total = 0.0;
    for (int c = 0; c < enc.cols(); ++c) total += enc.at(r, c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Training moved the taps off their zero initialization.
  Tensor taps = read_csv(dump_dir + "/encoder.0.taps.csv");
  bool moved = false;
  for (long long i = 0; i < taps.numel(); ++i) {
    if (i != cfg.enc_mem.n1 && std::abs(taps[i]) > 1e-6) moved = true;
  }
  CHECK(moved);
  std::filesystem::remove_all(out_dir);
}

TEST_CASE("bench scaling structure and validation") {
  BenchReport report = bench_scaling({SublayerKind::kSan, SublayerKind::kDfsmn},
                                     {16, 32, 64}, 8, 5);
  REQUIRE(report.series.size() == 2);
  for (const BenchSeries& series : report.series) {
    REQUIRE(series.points.size() == 3);
    CHECK(series.points[0].length == 16);
    CHECK(series.points[2].length == 64);
    for (const BenchPoint& pt : series.points) {
      CHECK(pt.median_seconds > 0.0);
      CHECK(std::isfinite(pt.median_seconds));
    }
    // Longer sequences can only cost more.
    CHECK(series.points[0].median_seconds <= series.points[1].median_seconds);
    CHECK(series.points[1].median_seconds <= series.points[2].median_seconds);
    CHECK(std::isfinite(series.slope));
    CHECK(series.slope > 0.0);
  }

  CHECK_THROWS_AS(bench_scaling({}, {16, 32}, 8, 5), ConfigError);
  CHECK_THROWS_AS(bench_scaling({SublayerKind::kSan}, {16}, 8, 5), ConfigError);
  CHECK_THROWS_AS(bench_scaling({SublayerKind::kSan}, {32, 16}, 8, 5), ConfigError);
  CHECK_THROWS_AS(bench_scaling({SublayerKind::kSan}, {16, 32}, 8, 4), ConfigError);
  CHECK_THROWS_AS(bench_scaling({SublayerKind::kSan}, {16, 32}, 0, 5), ConfigError);
}
