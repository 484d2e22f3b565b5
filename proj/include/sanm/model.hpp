// sanm/model.hpp

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

#ifndef SANM_MODEL_HPP_
#define SANM_MODEL_HPP_

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sanm/attention.hpp"
#include "sanm/memory.hpp"
#include "sanm/sanm_layer.hpp"

namespace sanm {

enum class SublayerKind { kSan, kDfsmn, kSanm };

std::string to_string(SublayerKind kind);
SublayerKind sublayer_kind_from_string(const std::string& name);

/// kAuto turns sinusoidal positions on for attention-only stacks and off when
/// FIR taps already encode order (dfsmn / sanm).
enum class PosEncMode { kAuto, kOn, kOff };

struct ModelConfig {
  SublayerKind encoder_kind = SublayerKind::kSanm;
  SublayerKind decoder_kind = SublayerKind::kSanm;
  int n = 2;        // encoder blocks
  int m = 1;        // decoder blocks with cross-attention
  int k = 0;        // decoder blocks without cross-attention
  int d_basic = 64;
  int d_ffn = 256;
  int h = 2;
  int feat_dim = 560;
  int vocab_size = 0;
  MemoryConfig enc_mem;     // d must equal d_basic when the encoder has memory
  MemoryConfig dec_mem;     // n2 must be 0: the decoder is unidirectional
  int dfsmn_hidden = 0;     // 0 selects d_basic
  PosEncMode pos_enc = PosEncMode::kAuto;
  double dropout = 0.1;
};

void validate(const ModelConfig& cfg);
int dfsmn_hidden_width(const ModelConfig& cfg);
bool positional_encoding_enabled(const ModelConfig& cfg, SublayerKind kind);

/// Flat key=value serialization (one pair per line), also used by the CLI
/// config file and the checkpoint header.
std::string config_to_text(const ModelConfig& cfg);
ModelConfig config_from_text(const std::string& text);

/// Parses key=value lines ('#' comments and blank lines allowed).
std::map<std::string, std::string> parse_kv_text(const std::string& text);

/// Consumes the model keys from kv, leaving unrelated keys (e.g. trainer
/// settings) in place for other consumers.
ModelConfig config_from_kv(std::map<std::string, std::string>& kv);

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

struct FfnParams {
  Tensor w1, b1;  // d_in x d_hidden
  Tensor w2, b2;  // d_hidden x d_out
};

/// Exactly one member group is populated, selected by `kind`.
struct BasicSublayerParams {
  SublayerKind kind = SublayerKind::kSan;
  AttentionParams attn;
  DfsmnLayerParams dfsmn;
  SanmParams sanm;
};

struct EncoderBlockParams {
  BasicSublayerParams basic;
  LayerNormParams ln_basic;
  FfnParams ffn;
  LayerNormParams ln_ffn;
};

struct DecoderBlockParams {
  FfnParams ffn;
  LayerNormParams ln_ffn;
  BasicSublayerParams basic;
  LayerNormParams ln_basic;
  bool has_cross = false;
  AttentionParams cross;
  LayerNormParams ln_cross;
};

struct ModelParams {
  Tensor input_w, input_b;  // feat_dim -> d_basic
  Tensor embedding;         // vocab_size x d_basic
  std::vector<EncoderBlockParams> encoder;
  std::vector<DecoderBlockParams> decoder;  // m cross blocks then k plain ones
  FfnParams output;                         // d_basic -> d_ffn -> vocab_size
};

/// Deterministic initialization: same seed, same bits. FIR taps start at zero;
/// weight matrices use fan-in-scaled uniform draws; biases start at zero.
ModelParams build_model(const ModelConfig& cfg, uint64_t seed);

/// Calls fn for every learnable tensor in a fixed order with a hierarchical
/// dotted name. The order is the serialization and optimizer order.
void visit_params(ModelParams& params, const ModelConfig& cfg,
                  const std::function<void(const std::string&, Tensor&)>& fn);

std::vector<Tensor> parameter_list(ModelParams& params, const ModelConfig& cfg);
long long count_parameters(const ModelConfig& cfg);

/// Head-averaged attention maps captured during a recorded forward pass.
struct LayerRecord {
  std::string name;
  Tensor weights;  // [Tq x Tk], values only
};

struct ForwardRecorder {
  std::vector<LayerRecord> attention;
};

struct ForwardOptions {
  double dropout = 0.0;  // 0 for evaluation
  Rng* rng = nullptr;    // required when dropout > 0
  ForwardRecorder* recorder = nullptr;
};

/// Sinusoidal position table, untracked constants.
Tensor sinusoidal_positions(int t_len, int d);

/// Per-utterance batch; sequences are kept at their own lengths instead of
/// being padded into one rank-3 block, so masks only matter where a single
/// padded sequence is evaluated.
struct SequenceBatch {
  std::vector<Tensor> feats;               // each [T_i x feat_dim]
  std::vector<std::vector<int>> targets;   // gold vocab ids, no BOS/EOS
};

/// Encoder over one (possibly padded) sequence: rows at index >= valid_len are
/// padding and are zeroed in the returned hidden sequence.
Tensor encoder_forward(const Tensor& feats, int valid_len,
                       const ModelParams& params, const ModelConfig& cfg,
                       const ForwardOptions& opt = {});

/// Teacher-forced decoder: targets_in starts with BOS. Returns unnormalized
/// vocabulary logits per position.
Tensor decoder_forward(const Tensor& z, int z_valid,
                       const std::vector<int>& targets_in,
                       const ModelParams& params, const ModelConfig& cfg,
                       const ForwardOptions& opt = {});

/// Token alphabet plus the four reserved ids.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  explicit Vocabulary(int alphabet_size);
  int size() const { return alphabet_ + kReserved; }
  int alphabet() const { return alphabet_; }
  int token_to_id(int token) const;  // out-of-alphabet tokens map to kUnk
  int id_to_token(int id) const;     // reserved ids map to -1

 private:
  int alphabet_;
};

struct Checkpoint {
  ModelConfig cfg;
  ModelParams params;
  std::vector<std::pair<std::string, Tensor>> extra;
};

/// Binary container: magic "SANMCKPT", u32 version, length-prefixed config
/// text, then two length-prefixed tensor sections (model, extra). Each tensor
/// is name, rank, dims, f64 payload; everything little-endian.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     ModelParams& params,
                     const std::vector<std::pair<std::string, Tensor>>& extra = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sanm

#endif  // SANM_MODEL_HPP_
