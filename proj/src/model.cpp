// sanm/model.cpp

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

#include "sanm/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"

namespace sanm {

std::string to_string(SublayerKind kind) {
  switch (kind) {
    case SublayerKind::kSan: return "san";
    case SublayerKind::kDfsmn: return "dfsmn";
    case SublayerKind::kSanm: return "sanm";
  }
  throw ConfigError("unknown sub-layer kind");
}

SublayerKind sublayer_kind_from_string(const std::string& name) {
  if (name == "san") return SublayerKind::kSan;
  if (name == "dfsmn") return SublayerKind::kDfsmn;
  if (name == "sanm") return SublayerKind::kSanm;
  throw ConfigError("unknown sub-layer kind '" + name + "' (want san|dfsmn|sanm)");
}

void validate(const ModelConfig& cfg) {
  if (cfg.n < 1 || cfg.m < 0 || cfg.k < 0) {
    throw ConfigError("model: need n >= 1, m >= 0, k >= 0");
  }
  if (cfg.d_basic < 2 || cfg.d_ffn < 1) {
    throw ConfigError("model: need d_basic >= 2 and d_ffn >= 1");
  }
  if (cfg.h < 1 || cfg.d_basic % cfg.h != 0) {
    throw ConfigError("model: d_basic " + std::to_string(cfg.d_basic) +
                      " must be divisible by h " + std::to_string(cfg.h));
  }
  if (cfg.feat_dim < 1) throw ConfigError("model: feat_dim must be >= 1");
  if (cfg.vocab_size < Vocabulary::kReserved + 1) {
    throw ConfigError("model: vocab_size must exceed the " +
                      std::to_string(Vocabulary::kReserved) + " reserved ids");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw ConfigError("model: dropout must be in [0, 1)");
  }
  if (cfg.dfsmn_hidden < 0) throw ConfigError("model: dfsmn_hidden must be >= 0");
  if (cfg.encoder_kind != SublayerKind::kSan) {
    validate(cfg.enc_mem);
    if (cfg.enc_mem.d != cfg.d_basic) {
      throw ConfigError("model: encoder memory width must equal d_basic");
    }
  }
  if (cfg.decoder_kind != SublayerKind::kSan) {
    validate(cfg.dec_mem);
    if (cfg.dec_mem.d != cfg.d_basic) {
      throw ConfigError("model: decoder memory width must equal d_basic");
    }
    if (cfg.dec_mem.n2 != 0) {
      throw ConfigError("model: decoder memory must be unidirectional (n2 = 0)");
    }
  }
}

int dfsmn_hidden_width(const ModelConfig& cfg) {
  return cfg.dfsmn_hidden > 0 ? cfg.dfsmn_hidden : cfg.d_basic;
}

bool positional_encoding_enabled(const ModelConfig& cfg, SublayerKind kind) {
  switch (cfg.pos_enc) {
    case PosEncMode::kOn: return true;
    case PosEncMode::kOff: return false;
    case PosEncMode::kAuto: return kind == SublayerKind::kSan;
  }
  return false;
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not key=value: '" + line + "'");
    }
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\r");
      const size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

namespace {

std::string pos_enc_to_string(PosEncMode mode) {
  switch (mode) {
    case PosEncMode::kAuto: return "auto";
    case PosEncMode::kOn: return "on";
    case PosEncMode::kOff: return "off";
  }
  throw ConfigError("unknown positional encoding mode");
}

PosEncMode pos_enc_from_string(const std::string& s) {
  if (s == "auto") return PosEncMode::kAuto;
  if (s == "on") return PosEncMode::kOn;
  if (s == "off") return PosEncMode::kOff;
  throw ConfigError("unknown pos_enc value '" + s + "' (want auto|on|off)");
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": '" + value + "' is not an integer");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": '" + value + "' is not a number");
  }
}

}  // namespace

std::string config_to_text(const ModelConfig& cfg) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.dropout);
  std::ostringstream out;
  out << "encoder_kind=" << to_string(cfg.encoder_kind) << "\n"
      << "decoder_kind=" << to_string(cfg.decoder_kind) << "\n"
      << "n=" << cfg.n << "\n"
      << "m=" << cfg.m << "\n"
      << "k=" << cfg.k << "\n"
      << "d_basic=" << cfg.d_basic << "\n"
      << "d_ffn=" << cfg.d_ffn << "\n"
      << "h=" << cfg.h << "\n"
      << "feat_dim=" << cfg.feat_dim << "\n"
      << "vocab_size=" << cfg.vocab_size << "\n"
      << "enc_n1=" << cfg.enc_mem.n1 << "\n"
      << "enc_n2=" << cfg.enc_mem.n2 << "\n"
      << "enc_s1=" << cfg.enc_mem.s1 << "\n"
      << "enc_s2=" << cfg.enc_mem.s2 << "\n"
      << "dec_n1=" << cfg.dec_mem.n1 << "\n"
      << "dec_n2=" << cfg.dec_mem.n2 << "\n"
      << "dec_s1=" << cfg.dec_mem.s1 << "\n"
      << "dec_s2=" << cfg.dec_mem.s2 << "\n"
      << "dfsmn_hidden=" << cfg.dfsmn_hidden << "\n"
      << "pos_enc=" << pos_enc_to_string(cfg.pos_enc) << "\n"
      << "dropout=" << buf << "\n";
  return out.str();
}

ModelConfig config_from_kv(std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  auto take = [&kv](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_int = [&take](const char* key, int def) {
    const std::string v = take(key);
    return v.empty() ? def : parse_int(key, v);
  };
  if (std::string v = take("encoder_kind"); !v.empty()) {
    cfg.encoder_kind = sublayer_kind_from_string(v);
  }
  if (std::string v = take("decoder_kind"); !v.empty()) {
    cfg.decoder_kind = sublayer_kind_from_string(v);
  }
  cfg.n = take_int("n", cfg.n);
  cfg.m = take_int("m", cfg.m);
  cfg.k = take_int("k", cfg.k);
  cfg.d_basic = take_int("d_basic", cfg.d_basic);
  cfg.d_ffn = take_int("d_ffn", cfg.d_ffn);
  cfg.h = take_int("h", cfg.h);
  cfg.feat_dim = take_int("feat_dim", cfg.feat_dim);
  cfg.vocab_size = take_int("vocab_size", cfg.vocab_size);
  cfg.enc_mem.n1 = take_int("enc_n1", cfg.enc_mem.n1);
  cfg.enc_mem.n2 = take_int("enc_n2", cfg.enc_mem.n2);
  cfg.enc_mem.s1 = take_int("enc_s1", cfg.enc_mem.s1);
  cfg.enc_mem.s2 = take_int("enc_s2", cfg.enc_mem.s2);
  cfg.dec_mem.n1 = take_int("dec_n1", cfg.dec_mem.n1);
  cfg.dec_mem.n2 = take_int("dec_n2", cfg.dec_mem.n2);
  cfg.dec_mem.s1 = take_int("dec_s1", cfg.dec_mem.s1);
  cfg.dec_mem.s2 = take_int("dec_s2", cfg.dec_mem.s2);
  cfg.dfsmn_hidden = take_int("dfsmn_hidden", cfg.dfsmn_hidden);
  if (std::string v = take("pos_enc"); !v.empty()) {
    cfg.pos_enc = pos_enc_from_string(v);
  }
  if (std::string v = take("dropout"); !v.empty()) {
    cfg.dropout = parse_double("dropout", v);
  }
  cfg.enc_mem.d = cfg.d_basic;
  cfg.dec_mem.d = cfg.d_basic;
  return cfg;
}

ModelConfig config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv = parse_kv_text(text);
  ModelConfig cfg = config_from_kv(kv);
  if (!kv.empty()) {
    throw ConfigError("unknown model config key '" + kv.begin()->first + "'");
  }
  validate(cfg);
  return cfg;
}

namespace {

LayerNormParams make_layer_norm(int d) {
  LayerNormParams p;
  p.gain = Tensor::full({d}, 1.0);
  p.bias = Tensor::zeros({d});
  return p;
}

FfnParams make_ffn(int d_in, int d_hidden, int d_out, Rng& rng) {
  FfnParams p;
  const double s1 = std::sqrt(1.0 / d_in);
  const double s2 = std::sqrt(1.0 / d_hidden);
  p.w1 = Tensor::uniform({d_in, d_hidden}, rng, -s1, s1);
  p.b1 = Tensor::zeros({d_hidden});
  p.w2 = Tensor::uniform({d_hidden, d_out}, rng, -s2, s2);
  p.b2 = Tensor::zeros({d_out});
  return p;
}

BasicSublayerParams make_basic(SublayerKind kind, const ModelConfig& cfg,
                               const MemoryConfig& mem, Rng& rng) {
  BasicSublayerParams p;
  p.kind = kind;
  const AttentionConfig acfg = AttentionConfig::split_evenly(cfg.d_basic, cfg.h);
  switch (kind) {
    case SublayerKind::kSan:
      p.attn = init_attention_params(acfg, rng);
      break;
    case SublayerKind::kDfsmn:
      p.dfsmn = init_dfsmn_params(mem, dfsmn_hidden_width(cfg), rng);
      break;
    case SublayerKind::kSanm:
      p.sanm = init_sanm_params(acfg, mem, rng);
      break;
  }
  return p;
}

using VisitFn = std::function<void(const std::string&, Tensor&)>;

void visit_attention(AttentionParams& p, const std::string& prefix, const VisitFn& fn) {
  fn(prefix + ".wq", p.wq);
  fn(prefix + ".wk", p.wk);
  fn(prefix + ".wv", p.wv);
  fn(prefix + ".wo", p.wo);
}

void visit_fir(FirCoefficients& fir, const std::string& prefix, const VisitFn& fn) {
  fn(prefix + ".fir_a", fir.a);
  if (fir.c.defined()) fn(prefix + ".fir_c", fir.c);
}

void visit_basic(BasicSublayerParams& p, const std::string& prefix, const VisitFn& fn) {
  switch (p.kind) {
    case SublayerKind::kSan:
      visit_attention(p.attn, prefix + ".attn", fn);
      break;
    case SublayerKind::kDfsmn:
      fn(prefix + ".w", p.dfsmn.w);
      fn(prefix + ".b", p.dfsmn.b);
      fn(prefix + ".v_w", p.dfsmn.v_w);
      fn(prefix + ".v_b", p.dfsmn.v_b);
      visit_fir(p.dfsmn.fir, prefix, fn);
      break;
    case SublayerKind::kSanm:
      visit_attention(p.sanm.attn, prefix + ".attn", fn);
      visit_fir(p.sanm.fir, prefix, fn);
      break;
  }
}

void visit_ffn(FfnParams& p, const std::string& prefix, const VisitFn& fn) {
  fn(prefix + ".w1", p.w1);
  fn(prefix + ".b1", p.b1);
  fn(prefix + ".w2", p.w2);
  fn(prefix + ".b2", p.b2);
}

void visit_layer_norm(LayerNormParams& p, const std::string& prefix, const VisitFn& fn) {
  fn(prefix + ".gain", p.gain);
  fn(prefix + ".bias", p.bias);
}

}  // namespace

ModelParams build_model(const ModelConfig& cfg, uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  ModelParams params;
  const int d = cfg.d_basic;
  const double in_scale = std::sqrt(1.0 / cfg.feat_dim);
  const double emb_scale = std::sqrt(1.0 / d);
  params.input_w = Tensor::uniform({cfg.feat_dim, d}, rng, -in_scale, in_scale);
  params.input_b = Tensor::zeros({d});
  params.embedding = Tensor::uniform({cfg.vocab_size, d}, rng, -emb_scale, emb_scale);
  params.encoder.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    EncoderBlockParams blk;
    blk.basic = make_basic(cfg.encoder_kind, cfg, cfg.enc_mem, rng);
    blk.ln_basic = make_layer_norm(d);
    blk.ffn = make_ffn(d, cfg.d_ffn, d, rng);
    blk.ln_ffn = make_layer_norm(d);
    params.encoder.push_back(std::move(blk));
  }
  params.decoder.reserve(cfg.m + cfg.k);
  for (int i = 0; i < cfg.m + cfg.k; ++i) {
    DecoderBlockParams blk;
    blk.ffn = make_ffn(d, cfg.d_ffn, d, rng);
    blk.ln_ffn = make_layer_norm(d);
    blk.basic = make_basic(cfg.decoder_kind, cfg, cfg.dec_mem, rng);
    blk.ln_basic = make_layer_norm(d);
    blk.has_cross = i < cfg.m;
    if (blk.has_cross) {
      blk.cross = init_attention_params(AttentionConfig::split_evenly(d, cfg.h), rng);
      blk.ln_cross = make_layer_norm(d);
    }
    params.decoder.push_back(std::move(blk));
  }
  params.output = make_ffn(d, cfg.d_ffn, cfg.vocab_size, rng);
  return params;
}

void visit_params(ModelParams& params, const ModelConfig& cfg, const VisitFn& fn) {
  (void)cfg;
  fn("input.w", params.input_w);
  fn("input.b", params.input_b);
  fn("embedding", params.embedding);
  for (size_t i = 0; i < params.encoder.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i);
    EncoderBlockParams& blk = params.encoder[i];
    visit_basic(blk.basic, prefix + ".basic", fn);
    visit_layer_norm(blk.ln_basic, prefix + ".ln_basic", fn);
    visit_ffn(blk.ffn, prefix + ".ffn", fn);
    visit_layer_norm(blk.ln_ffn, prefix + ".ln_ffn", fn);
  }
  for (size_t i = 0; i < params.decoder.size(); ++i) {
    const std::string prefix = "decoder." + std::to_string(i);
    DecoderBlockParams& blk = params.decoder[i];
    visit_ffn(blk.ffn, prefix + ".ffn", fn);
    visit_layer_norm(blk.ln_ffn, prefix + ".ln_ffn", fn);
    visit_basic(blk.basic, prefix + ".basic", fn);
    visit_layer_norm(blk.ln_basic, prefix + ".ln_basic", fn);
    if (blk.has_cross) {
      visit_attention(blk.cross, prefix + ".cross", fn);
      visit_layer_norm(blk.ln_cross, prefix + ".ln_cross", fn);
    }
  }
  visit_ffn(params.output, "output", fn);
}

std::vector<Tensor> parameter_list(ModelParams& params, const ModelConfig& cfg) {
  std::vector<Tensor> list;
  visit_params(params, cfg, [&list](const std::string&, Tensor& t) { list.push_back(t); });
  return list;
}

long long count_parameters(const ModelConfig& cfg) {
  ModelParams params = build_model(cfg, 0);
  long long total = 0;
  visit_params(params, cfg, [&total](const std::string&, Tensor& t) { total += t.numel(); });
  return total;
}

Tensor sinusoidal_positions(int t_len, int d) {
  if (t_len < 1 || d < 1) throw ShapeError("sinusoidal_positions: sizes must be >= 1");
  Tensor pe = Tensor::zeros({t_len, d});
  for (int t = 0; t < t_len; ++t) {
    for (int j = 0; j < d; ++j) {
      const int pair = j / 2;
      const double freq = std::pow(10000.0, -2.0 * pair / d);
      pe.at(t, j) = (j % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
    }
  }
  return pe;
}

namespace {

Tensor ffn_forward(const Tensor& x, const FfnParams& p) {
  Tensor hidden = relu(add_bias(matmul(x, p.w1), p.b1));
  return add_bias(matmul(hidden, p.w2), p.b2);
}

Tensor maybe_dropout(const Tensor& x, const ForwardOptions& opt) {
  if (opt.dropout <= 0.0) return x;
  if (opt.rng == nullptr) throw ConfigError("forward: dropout requires an rng");
  return dropout(x, opt.dropout, *opt.rng);
}

// Post-norm residual: layer_norm(x + dropout(sublayer(x))).
Tensor sublayer_wrap(const Tensor& x, const Tensor& y, const LayerNormParams& ln,
                     const ForwardOptions& opt) {
  return layer_norm(add(x, maybe_dropout(y, opt)), ln.gain, ln.bias);
}

Tensor head_mean_values(const std::vector<Tensor>& heads) {
  Tensor mean = Tensor::zeros(heads[0].shape());
  for (const Tensor& w : heads) {
    for (long long i = 0; i < mean.numel(); ++i) mean[i] += w[i];
  }
  const double inv = 1.0 / static_cast<double>(heads.size());
  for (long long i = 0; i < mean.numel(); ++i) mean[i] *= inv;
  return mean;
}

void record_attention(const ForwardOptions& opt, const std::string& name,
                      const AttentionRecorder& rec) {
  if (opt.recorder && !rec.head_weights.empty()) {
    opt.recorder->attention.push_back({name, head_mean_values(rec.head_weights)});
  }
}

Tensor basic_forward(const Tensor& x, const BasicSublayerParams& p,
                     const ModelConfig& cfg, const MemoryConfig& mem,
                     const AttentionMask& mask, int valid_rows,
                     const ForwardOptions& opt, const std::string& name) {
  const AttentionConfig acfg = AttentionConfig::split_evenly(cfg.d_basic, cfg.h);
  AttentionRecorder rec;
  AttentionRecorder* recp = opt.recorder ? &rec : nullptr;
  Tensor out;
  switch (p.kind) {
    case SublayerKind::kSan:
      out = multi_head(x, x, acfg, p.attn, mask, opt.dropout, opt.rng, recp);
      break;
    case SublayerKind::kDfsmn:
      out = dfsmn_layer(x, p.dfsmn, mem, valid_rows);
      break;
    case SublayerKind::kSanm:
      out = sanm_layer(x, acfg, p.sanm, mask, opt.dropout, opt.rng, recp);
      break;
  }
  record_attention(opt, name, rec);
  return out;
}

}  // namespace

Tensor encoder_forward(const Tensor& feats, int valid_len,
                       const ModelParams& params, const ModelConfig& cfg,
                       const ForwardOptions& opt) {
  validate(cfg);
  if (feats.shape().size() != 2 || feats.cols() != cfg.feat_dim) {
    throw ShapeError("encoder: features " + feats.shape_str() +
                     " do not match feat_dim " + std::to_string(cfg.feat_dim));
  }
  const int t_len = feats.rows();
  if (valid_len < 1 || valid_len > t_len) {
    throw ShapeError("encoder: valid_len " + std::to_string(valid_len) +
                     " out of range for " + std::to_string(t_len) + " rows");
  }
  Tensor x = add_bias(matmul(feats, params.input_w), params.input_b);
  if (positional_encoding_enabled(cfg, cfg.encoder_kind)) {
    x = add(x, sinusoidal_positions(t_len, cfg.d_basic));
  }
  x = mask_rows(x, valid_len);
  x = maybe_dropout(x, opt);
  const AttentionMask mask = valid_len < t_len
                                 ? make_padding_mask(t_len, t_len, valid_len)
                                 : AttentionMask::none();
  for (size_t i = 0; i < params.encoder.size(); ++i) {
    const EncoderBlockParams& blk = params.encoder[i];
    Tensor y = basic_forward(x, blk.basic, cfg, cfg.enc_mem, mask, valid_len, opt,
                             "encoder." + std::to_string(i) + ".basic");
    // padding rows pick up the layer-norm bias; keep them at zero
    x = mask_rows(sublayer_wrap(x, y, blk.ln_basic, opt), valid_len);
    y = ffn_forward(x, blk.ffn);
    x = mask_rows(sublayer_wrap(x, y, blk.ln_ffn, opt), valid_len);
  }
  return x;
}

Tensor decoder_forward(const Tensor& z, int z_valid,
                       const std::vector<int>& targets_in,
                       const ModelParams& params, const ModelConfig& cfg,
                       const ForwardOptions& opt) {
  validate(cfg);
  if (z.shape().size() != 2 || z.cols() != cfg.d_basic) {
    throw ShapeError("decoder: encoder output " + z.shape_str() +
                     " does not match d_basic " + std::to_string(cfg.d_basic));
  }
  if (z_valid < 1 || z_valid > z.rows()) {
    throw ShapeError("decoder: z_valid " + std::to_string(z_valid) +
                     " out of range for " + std::to_string(z.rows()) + " rows");
  }
  if (targets_in.empty()) throw ShapeError("decoder: empty target sequence");
  const int t_out = static_cast<int>(targets_in.size());
  Tensor x = scale(embedding_lookup(params.embedding, targets_in),
                   std::sqrt(static_cast<double>(cfg.d_basic)));
  if (positional_encoding_enabled(cfg, cfg.decoder_kind)) {
    x = add(x, sinusoidal_positions(t_out, cfg.d_basic));
  }
  x = maybe_dropout(x, opt);
  const AttentionMask causal = make_causal_mask(t_out);
  const AttentionMask cross_mask =
      z_valid < z.rows() ? make_padding_mask(t_out, z.rows(), z_valid)
                         : AttentionMask::none();
  for (size_t i = 0; i < params.decoder.size(); ++i) {
    const DecoderBlockParams& blk = params.decoder[i];
    const std::string prefix = "decoder." + std::to_string(i);
    Tensor y = ffn_forward(x, blk.ffn);
    x = sublayer_wrap(x, y, blk.ln_ffn, opt);
    y = basic_forward(x, blk.basic, cfg, cfg.dec_mem, causal, -1, opt, prefix + ".self");
    x = sublayer_wrap(x, y, blk.ln_basic, opt);
    if (blk.has_cross) {
      AttentionRecorder rec;
      AttentionRecorder* recp = opt.recorder ? &rec : nullptr;
      y = multi_head(x, z, AttentionConfig::split_evenly(cfg.d_basic, cfg.h),
                     blk.cross, cross_mask, opt.dropout, opt.rng, recp);
      record_attention(opt, prefix + ".cross", rec);
      x = sublayer_wrap(x, y, blk.ln_cross, opt);
    }
  }
  return ffn_forward(x, params.output);
}

Vocabulary::Vocabulary(int alphabet_size) : alphabet_(alphabet_size) {
  if (alphabet_size < 1) throw ConfigError("vocabulary: alphabet must be >= 1");
}

int Vocabulary::token_to_id(int token) const {
  return (token >= 0 && token < alphabet_) ? kReserved + token : kUnk;
}

int Vocabulary::id_to_token(int id) const {
  return (id >= kReserved && id < size()) ? id - kReserved : -1;
}

namespace {

constexpr char kCheckpointMagic[] = "SANMCKPT";
constexpr uint32_t kCheckpointVersion = 1;

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  io::write_string(out, name);
  io::write_u32(out, static_cast<uint32_t>(t.shape().size()));
  for (int d : t.shape()) io::write_u32(out, static_cast<uint32_t>(d));
  io::write_raw(out, t.data(), sizeof(double) * static_cast<size_t>(t.numel()));
}

std::pair<std::string, Tensor> read_tensor(io::Reader& r) {
  const std::string name = r.str("tensor name");
  const uint32_t rank = r.u32("tensor rank for '" + name + "'");
  if (rank == 0 || rank > 8) {
    throw DataError("checkpoint: implausible rank " + std::to_string(rank) +
                    " for tensor '" + name + "' at byte offset " +
                    std::to_string(r.offset()));
  }
  std::vector<int> shape(rank);
  long long numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t d = r.u32("dimension of '" + name + "'");
    if (d == 0 || d > (1u << 28)) {
      throw DataError("checkpoint: implausible dimension " + std::to_string(d) +
                      " for tensor '" + name + "'");
    }
    shape[i] = static_cast<int>(d);
    numel *= d;
  }
  std::vector<double> data(static_cast<size_t>(numel));
  r.bytes(data.data(), sizeof(double) * data.size(), "payload of '" + name + "'");
  return {name, Tensor::from_data(shape, std::move(data))};
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     ModelParams& params,
                     const std::vector<std::pair<std::string, Tensor>>& extra) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, 8);
  io::write_u32(out, kCheckpointVersion);
  io::write_string(out, config_to_text(cfg));
  uint32_t n_params = 0;
  visit_params(params, cfg, [&n_params](const std::string&, Tensor&) { ++n_params; });
  io::write_u32(out, n_params);
  visit_params(params, cfg, [&out](const std::string& name, Tensor& t) {
    write_tensor(out, name, t);
  });
  io::write_u32(out, static_cast<uint32_t>(extra.size()));
  for (const auto& [name, t] : extra) write_tensor(out, name, t);
  out.flush();
  if (!out) throw DataError("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  io::Reader r(in, path);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.cfg = config_from_text(r.str("config header"));
  ckpt.params = build_model(ckpt.cfg, 0);
  const uint32_t n_params = r.u32("model tensor count");
  std::vector<std::pair<std::string, Tensor>> loaded;
  loaded.reserve(n_params);
  for (uint32_t i = 0; i < n_params; ++i) loaded.push_back(read_tensor(r));
  size_t next = 0;
  visit_params(ckpt.params, ckpt.cfg, [&](const std::string& name, Tensor& t) {
    if (next >= loaded.size()) {
      throw DataError("checkpoint: missing tensor '" + name + "'");
    }
    auto& [got_name, got] = loaded[next++];
    if (got_name != name) {
      throw DataError("checkpoint: expected tensor '" + name + "', found '" +
                      got_name + "'");
    }
    if (!got.same_shape(t)) {
      throw DataError("checkpoint: tensor '" + name + "' has shape " +
                      got.shape_str() + ", expected " + t.shape_str());
    }
    t.vec() = got.vec();
  });
  if (next != loaded.size()) {
    throw DataError("checkpoint: " + std::to_string(loaded.size() - next) +
                    " unexpected model tensors");
  }
  const uint32_t n_extra = r.u32("extra tensor count");
  for (uint32_t i = 0; i < n_extra; ++i) ckpt.extra.push_back(read_tensor(r));
  return ckpt;
}

}  // namespace sanm
