// tools/sanm_cli.cpp

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

// Command-line surface: train / eval / bench / viz. Exit codes: 0 success,
// 1 usage or configuration error, 2 data error, 3 numeric divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sanm/analysis.hpp"
#include "sanm/frontend.hpp"
#include "sanm/model.hpp"
#include "sanm/trainer.hpp"

namespace {

using namespace sanm;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Task keys share the config file with model and trainer keys. Consumed here
// so the leftover check below still catches typos.
struct TaskKeys {
  SyntheticTask task;
  int count = 500;
  uint64_t seed = 100;
};

TaskKeys task_from_kv(std::map<std::string, std::string>& kv) {
  TaskKeys out;
  auto take_int = [&kv](const std::string& key, long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const long long v = std::stoll(it->second);
    kv.erase(it);
    return v;
  };
  auto take_double = [&kv](const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const double v = std::stod(it->second);
    kv.erase(it);
    return v;
  };
  out.task.alphabet = static_cast<int>(take_int("task_alphabet", out.task.alphabet));
  out.task.min_tokens = static_cast<int>(take_int("task_min_tokens", out.task.min_tokens));
  out.task.max_tokens = static_cast<int>(take_int("task_max_tokens", out.task.max_tokens));
  out.task.min_frames = static_cast<int>(take_int("task_min_frames", out.task.min_frames));
  out.task.max_frames = static_cast<int>(take_int("task_max_frames", out.task.max_frames));
  out.task.base_dim = static_cast<int>(take_int("task_base_dim", out.task.base_dim));
  out.task.noise = take_double("task_noise", out.task.noise);
  out.task.template_seed =
      static_cast<uint64_t>(take_int("task_template_seed",
                                     static_cast<long long>(out.task.template_seed)));
  out.count = static_cast<int>(take_int("task_count", out.count));
  out.seed = static_cast<uint64_t>(take_int("task_seed", static_cast<long long>(out.seed)));
  return out;
}

FeatureSpec spec_for(const Tensor& feats) {
  FeatureSpec spec;
  spec.base_dim = feats.cols();
  return spec;
}

int run_train(const std::string& config_path, const std::string& out_dir,
              const std::string& corpus_path) {
  std::map<std::string, std::string> kv = parse_kv_text(read_text_file(config_path));
  TaskKeys tk = task_from_kv(kv);
  if (!kv.count("vocab_size")) {
    kv["vocab_size"] = std::to_string(tk.task.alphabet + Vocabulary::kReserved);
  }
  ModelConfig model_cfg = config_from_kv(kv);
  TrainConfig train_cfg = train_config_from_kv(kv);
  if (!kv.empty()) {
    throw ConfigError("config '" + config_path + "': unknown key '" +
                      kv.begin()->first + "'");
  }
  std::vector<Utterance> corpus;
  if (!corpus_path.empty()) {
    corpus = read_corpus(corpus_path);
  } else {
    validate(tk.task);
    corpus = generate_corpus(tk.task, tk.seed, tk.count, "train");
    std::filesystem::create_directories(out_dir);
    write_corpus(out_dir + "/corpus.bin", corpus);
  }
  std::printf("training on %zu utterances for %lld steps\n", corpus.size(),
              train_cfg.max_steps);
  TrainResult result = train(model_cfg, corpus, train_cfg, out_dir);
  std::printf("checkpoint: %s\nmetrics: %s\n", result.checkpoint_path.c_str(),
              result.metrics_path.c_str());
  if (result.diverged) {
    std::fprintf(stderr, "training diverged; kept the last finite state\n");
    return 3;
  }
  if (!result.metrics.empty()) {
    std::printf("final loss %.6f\n", result.metrics.back().loss);
  }
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& corpus_path,
             int max_len, bool per_utt) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::vector<Utterance> corpus = read_corpus(corpus_path);
  if (corpus.empty()) throw DataError("eval: corpus '" + corpus_path + "' is empty");
  Vocabulary vocab(ckpt.cfg.vocab_size - Vocabulary::kReserved);
  double edits = 0.0;
  long long ref_len = 0;
  for (const Utterance& utt : corpus) {
    const FeatureSpec spec = spec_for(utt.feats);
    if (spec.stacked_dim() != ckpt.cfg.feat_dim) {
      throw DataError("eval: utterance '" + utt.id + "' stacks to " +
                      std::to_string(spec.stacked_dim()) +
                      " dims, model expects " + std::to_string(ckpt.cfg.feat_dim));
    }
    Tensor feats = lfr_stack(mvn(utt.feats), spec);
    Tensor z = encoder_forward(feats, feats.rows(), ckpt.params, ckpt.cfg);
    std::vector<int> hyp = greedy_decode(z, ckpt.params, ckpt.cfg, max_len);
    std::vector<int> ref;
    ref.reserve(utt.tokens.size());
    for (int tok : utt.tokens) ref.push_back(vocab.token_to_id(tok));
    const double rate = cer(hyp, ref);
    edits += rate * static_cast<double>(ref.size());
    ref_len += static_cast<long long>(ref.size());
    if (per_utt) {
      std::printf("%s cer %.4f (%zu hyp, %zu ref)\n", utt.id.c_str(), rate,
                  hyp.size(), ref.size());
    }
  }
  std::printf("CER %.2f%% over %zu utterances\n", 100.0 * edits / ref_len,
              corpus.size());
  return 0;
}

int run_bench(const std::string& kinds_csv, const std::string& lengths_csv,
              int reps, int d) {
  std::vector<SublayerKind> kinds;
  for (const std::string& name : split_csv(kinds_csv)) {
    kinds.push_back(sublayer_kind_from_string(name));
  }
  std::vector<int> lengths;
  for (const std::string& item : split_csv(lengths_csv)) {
    lengths.push_back(std::stoi(item));
  }
  BenchReport report = bench_scaling(kinds, lengths, d, reps);
  for (const BenchSeries& series : report.series) {
    for (const BenchPoint& p : series.points) {
      std::printf("%-6s n %5d median %10.3f ms\n", to_string(series.kind).c_str(),
                  p.length, 1e3 * p.median_seconds);
    }
    std::printf("%-6s slope %.3f\n", to_string(series.kind).c_str(), series.slope);
  }
  return 0;
}

int run_viz(const std::string& ckpt_path, const std::string& corpus_path,
            const std::string& utt_id, const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::vector<Utterance> corpus = read_corpus(corpus_path);
  const Utterance* utt = nullptr;
  for (const Utterance& u : corpus) {
    if (u.id == utt_id) {
      utt = &u;
      break;
    }
  }
  if (!utt) {
    throw DataError("viz: utterance '" + utt_id + "' not in '" + corpus_path + "'");
  }
  AnalysisDump dump = dump_analysis(ckpt.params, ckpt.cfg, *utt,
                                    spec_for(utt->feats), out_dir);
  for (const std::string& file : dump.files) std::printf("%s\n", file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-equipped self-attention encoder-decoder"};
  app.require_subcommand(1);

  std::string config_path, out_dir, corpus_path, ckpt_path, utt_id;
  std::string kinds_csv = "san,dfsmn,sanm";
  std::string lengths_csv = "256,512,1024,2048,4096";
  int reps = 5;
  int d = 64;
  int max_len = 64;
  bool per_utt = false;

  CLI::App* tr = app.add_subcommand("train", "train a model on a corpus");
  tr->add_option("--config", config_path, "flat key=value config file")->required();
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_option("--corpus", corpus_path,
                 "corpus file; omitted means synthesize from the task_* keys");

  CLI::App* ev = app.add_subcommand("eval", "greedy-decode a corpus and report CER");
  ev->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  ev->add_option("--corpus", corpus_path, "corpus file")->required();
  ev->add_option("--max-len", max_len, "decode length cap");
  ev->add_flag("--per-utt", per_utt, "print one line per utterance");

  CLI::App* be = app.add_subcommand("bench", "time sub-layer forwards vs length");
  be->add_option("--kinds", kinds_csv, "comma list of san,dfsmn,sanm");
  be->add_option("--lengths", lengths_csv, "comma list, strictly increasing");
  be->add_option("--reps", reps, "samples per point, at least 5");
  be->add_option("--d", d, "model width");

  CLI::App* vz = app.add_subcommand("viz", "export attention maps and filter taps");
  vz->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  vz->add_option("--corpus", corpus_path, "corpus holding the utterance")->required();
  vz->add_option("--utt", utt_id, "utterance id")->required();
  vz->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (tr->parsed()) return run_train(config_path, out_dir, corpus_path);
    if (ev->parsed()) return run_eval(ckpt_path, corpus_path, max_len, per_utt);
    if (be->parsed()) return run_bench(kinds_csv, lengths_csv, reps, d);
    if (vz->parsed()) return run_viz(ckpt_path, corpus_path, utt_id, out_dir);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
