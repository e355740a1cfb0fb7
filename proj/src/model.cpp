// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace culturesteer {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// ---------------------------------------------------------------------------
// Tensor file container
// ---------------------------------------------------------------------------

namespace {

void write_le_f32(std::ofstream& out, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  // Little-endian hosts write directly; this tool targets LE platforms and
  // the format doc pins the byte order.
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * 4));
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const TensorFile& tf) {
  ordered_json header;
  header["format"] = "culturesteer-tensors";
  header["version"] = 1;
  header["dtype"] = "f32";
  header["kind"] = tf.kind;
  header["meta"] = tf.meta;
  ordered_json names = ordered_json::array();
  for (const auto& [name, tensor] : tf.tensors) {
    ordered_json t;
    t["name"] = name;
    t["shape"] = tensor.shape;
    names.push_back(std::move(t));
  }
  header["tensors"] = std::move(names);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << header.dump() << "\n";
  for (const auto& [name, tensor] : tf.tensors) {
    if (tensor.data.size() != tensor.numel()) {
      throw Error(Errc::shape_mismatch,
                  "tensor '" + name + "' data does not match shape");
    }
    write_le_f32(out, tensor.data);
  }
  if (!out) throw Error(Errc::io_error, "short write to " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw Error(Errc::parse_error, "missing tensor header in " + path.string());
  }
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "culturesteer-tensors" ||
      header.value("dtype", "") != "f32") {
    throw Error(Errc::parse_error, path.string() + ": not a tensor file");
  }
  TensorFile tf;
  tf.kind = header.value("kind", "");
  try {
    if (header.contains("meta")) {
      for (auto it = header["meta"].begin(); it != header["meta"].end(); ++it) {
        tf.meta[it.key()] = it.value().get<std::string>();
      }
    }
    for (const auto& t : header.at("tensors")) {
      Tensor tensor;
      tensor.shape = t.at("shape").get<std::vector<std::int64_t>>();
      tensor.data.resize(tensor.numel());
      in.read(reinterpret_cast<char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * 4));
      if (static_cast<std::size_t>(in.gcount()) != tensor.data.size() * 4) {
        throw Error(Errc::shape_mismatch,
                    "tensor '" + t.at("name").get<std::string>() +
                        "' payload truncated in " + path.string());
      }
      tf.tensors.emplace_back(t.at("name").get<std::string>(),
                              std::move(tensor));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw Error(Errc::parse_error,
                path.string() + ": trailing bytes after payload");
  }
  return tf;
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

std::vector<Token> encode(std::string_view text) {
  std::vector<Token> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<Token>(c) + kByteOffset);
  return out;
}

std::string decode(std::span<const Token> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (t >= kByteOffset && t < kByteVocab) {
      out.push_back(static_cast<char>(t - kByteOffset));
    }
    // BOS/EOS/PAD decode to nothing.
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

void ModelConfig::check() const {
  if (vocab_size < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 ||
      d_ff < 1) {
    throw Error(Errc::bad_config, "all dimensions must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw Error(Errc::bad_config, "d_model must be divisible by n_heads");
  }
  if (max_seq < 8) throw Error(Errc::bad_config, "max_seq must be >= 8");
}

std::vector<std::pair<std::string, std::vector<std::int64_t>>> expected_tensors(
    const ModelConfig& c) {
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> out;
  auto add = [&](std::string name, std::vector<std::int64_t> shape) {
    out.emplace_back(std::move(name), std::move(shape));
  };
  std::int64_t v = c.vocab_size, d = c.d_model, f = c.d_ff, s = c.max_seq;
  add("tok_emb", {v, d});
  add("pos_emb", {s, d});
  for (int l = 0; l < c.n_layers; ++l) {
    std::string p = "blocks." + std::to_string(l) + ".";
    add(p + "ln1.weight", {d});
    add(p + "ln1.bias", {d});
    add(p + "attn.wq", {d, d});
    add(p + "attn.bq", {d});
    add(p + "attn.wk", {d, d});
    add(p + "attn.bk", {d});
    add(p + "attn.wv", {d, d});
    add(p + "attn.bv", {d});
    add(p + "attn.wo", {d, d});
    add(p + "attn.bo", {d});
    add(p + "ln2.weight", {d});
    add(p + "ln2.bias", {d});
    add(p + "ff.w1", {f, d});
    add(p + "ff.b1", {f});
    add(p + "ff.w2", {d, f});
    add(p + "ff.b2", {d});
  }
  add("ln_f.weight", {d});
  add("ln_f.bias", {d});
  return out;
}

namespace {

bool is_gain(const std::string& name) {
  return name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
}

bool is_bias(const std::string& name) {
  return (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) ||
         name.find(".b") != std::string::npos;
}

}  // namespace

ModelHandle::ModelHandle(const ModelConfig& config) : config_(config) {
  config_.check();
  double scale = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  for (const auto& [name, shape] : expected_tensors(config_)) {
    Tensor t;
    t.shape = shape;
    t.data.resize(t.numel());
    if (is_gain(name)) {
      std::fill(t.data.begin(), t.data.end(), 1.0f);
    } else if (is_bias(name)) {
      std::fill(t.data.begin(), t.data.end(), 0.0f);
    } else {
      Rng rng(hash64(config_.init_seed, name));
      for (auto& x : t.data) x = static_cast<float>(rng.normal() * scale);
    }
    params_.emplace(name, std::move(t));
  }
}

ModelHandle::ModelHandle(const ModelConfig& config,
                         const std::filesystem::path& weights)
    : config_(config) {
  config_.check();
  adopt(read_tensor_file(weights));
}

ModelHandle::ModelHandle(const ModelConfig& config, TensorFile weights)
    : config_(config) {
  config_.check();
  adopt(std::move(weights));
}

void ModelHandle::adopt(TensorFile tf) {
  std::map<std::string, Tensor> loaded;
  for (auto& [name, tensor] : tf.tensors) loaded.emplace(name, std::move(tensor));
  for (const auto& [name, shape] : expected_tensors(config_)) {
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      throw Error(Errc::shape_mismatch, "missing tensor '" + name + "'");
    }
    if (it->second.shape != shape) {
      throw Error(Errc::shape_mismatch, "tensor '" + name + "' has wrong shape");
    }
    params_.emplace(name, std::move(it->second));
    loaded.erase(it);
  }
  if (!loaded.empty()) {
    throw Error(Errc::shape_mismatch,
                "unexpected tensor '" + loaded.begin()->first + "'");
  }
}

const Tensor& ModelHandle::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw Error(Errc::shape_mismatch, "no tensor '" + name + "'");
  }
  return it->second;
}

bool ModelHandle::has_param(const std::string& name) const {
  return params_.count(name) != 0;
}

std::vector<std::string> ModelHandle::param_names() const {
  std::vector<std::string> names;
  for (const auto& [name, shape] : expected_tensors(config_)) names.push_back(name);
  return names;
}

void ModelHandle::save(const std::filesystem::path& path) const {
  TensorFile tf;
  tf.kind = "model-weights";
  tf.meta["d_model"] = std::to_string(config_.d_model);
  tf.meta["n_layers"] = std::to_string(config_.n_layers);
  tf.meta["n_heads"] = std::to_string(config_.n_heads);
  tf.meta["d_ff"] = std::to_string(config_.d_ff);
  tf.meta["vocab_size"] = std::to_string(config_.vocab_size);
  tf.meta["max_seq"] = std::to_string(config_.max_seq);
  for (const auto& [name, shape] : expected_tensors(config_)) {
    tf.tensors.emplace_back(name, param(name));
  }
  write_tensor_file(path, tf);
}

ModelHandle load_model(const ModelConfig& config,
                       const std::optional<std::filesystem::path>& weights_path) {
  if (weights_path) return ModelHandle(config, *weights_path);
  return ModelHandle(config);
}

void InterventionSpec::check(const ModelConfig& config) const {
  for (const auto& e : entries) {
    if (e.layer < 0 || e.layer >= config.n_layers) {
      throw Error(Errc::bad_config,
                  "intervention layer " + std::to_string(e.layer) +
                      " outside [0, " + std::to_string(config.n_layers) + ")");
    }
    if (e.vector.size() != static_cast<std::size_t>(config.d_model)) {
      throw Error(Errc::shape_mismatch, "intervention vector length " +
                                            std::to_string(e.vector.size()) +
                                            " != d_model");
    }
    if (!std::isfinite(e.alpha)) {
      throw Error(Errc::bad_config, "intervention alpha must be finite");
    }
  }
}

bool InterventionSpec::active() const {
  for (const auto& e : entries) {
    if (e.alpha != 0.0f) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Forward pass. One Decoder holds the incremental KV state for one sequence;
// all public entry points (logits, generation, perplexity) run through
// Decoder::step so every path is bitwise-consistent with every other.
// ---------------------------------------------------------------------------

namespace {

void layer_norm(const float* x, const float* gain, const float* bias, int d,
                float* out) {
  double mean = 0.0;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    double c = x[i] - mean;
    var += c * c;
  }
  var /= d;
  double inv = 1.0 / std::sqrt(var + 1e-5);
  for (int i = 0; i < d; ++i) {
    out[i] = static_cast<float>((x[i] - mean) * inv * gain[i] + bias[i]);
  }
}

void matvec(const float* w, const float* x, const float* b, int rows, int cols,
            float* out) {
  for (int r = 0; r < rows; ++r) {
    const float* row = w + static_cast<std::size_t>(r) * cols;
    double acc = b ? b[r] : 0.0;
    for (int c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * x[c];
    out[r] = static_cast<float>(acc);
  }
}

float gelu(float x) {
  return static_cast<float>(0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)));
}

}  // namespace

struct Session::Decoder {
  const ModelHandle& m;
  const InterventionSpec* iv;  // nullable
  std::function<void(int, int, const float*)> on_residual;  // nullable

  int pos = 0;
  // Per layer: cached K and V, each [t, d_model] flattened.
  std::vector<std::vector<float>> kcache, vcache;

  explicit Decoder(const ModelHandle& model, const InterventionSpec* spec)
      : m(model), iv(spec) {
    kcache.resize(m.config().n_layers);
    vcache.resize(m.config().n_layers);
  }

  std::vector<float> step(Token t) {
    const ModelConfig& c = m.config();
    if (t < 0 || t >= c.vocab_size) {
      throw Error(Errc::token_out_of_range, "token " + std::to_string(t));
    }
    if (pos >= c.max_seq) {
      throw Error(Errc::sequence_too_long,
                  "position " + std::to_string(pos) + " >= max_seq");
    }
    const int d = c.d_model;
    const int hd = d / c.n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    std::vector<float> x(d), z(d), q(d), k(d), v(d), ctx(d), tmp(d);
    std::vector<float> ff1(c.d_ff);
    const float* te = m.param("tok_emb").data.data() +
                      static_cast<std::size_t>(t) * d;
    const float* pe = m.param("pos_emb").data.data() +
                      static_cast<std::size_t>(pos) * d;
    for (int i = 0; i < d; ++i) x[i] = te[i] + pe[i];

    for (int l = 0; l < c.n_layers; ++l) {
      std::string p = "blocks." + std::to_string(l) + ".";
      layer_norm(x.data(), m.param(p + "ln1.weight").data.data(),
                 m.param(p + "ln1.bias").data.data(), d, z.data());
      matvec(m.param(p + "attn.wq").data.data(), z.data(),
             m.param(p + "attn.bq").data.data(), d, d, q.data());
      matvec(m.param(p + "attn.wk").data.data(), z.data(),
             m.param(p + "attn.bk").data.data(), d, d, k.data());
      matvec(m.param(p + "attn.wv").data.data(), z.data(),
             m.param(p + "attn.bv").data.data(), d, d, v.data());
      kcache[l].insert(kcache[l].end(), k.begin(), k.end());
      vcache[l].insert(vcache[l].end(), v.begin(), v.end());
      const int t_len = pos + 1;
      const float* kc = kcache[l].data();
      const float* vc = vcache[l].data();
      for (int h = 0; h < c.n_heads; ++h) {
        const int off = h * hd;
        // Causal attention over all cached positions, softmax in double.
        std::vector<double> scores(t_len);
        double mx = -1e300;
        for (int j = 0; j < t_len; ++j) {
          const float* kj = kc + static_cast<std::size_t>(j) * d + off;
          double s = 0.0;
          for (int i = 0; i < hd; ++i) {
            s += static_cast<double>(q[off + i]) * kj[i];
          }
          s *= att_scale;
          scores[j] = s;
          mx = std::max(mx, s);
        }
        double denom = 0.0;
        for (int j = 0; j < t_len; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          denom += scores[j];
        }
        for (int i = 0; i < hd; ++i) {
          double acc = 0.0;
          for (int j = 0; j < t_len; ++j) {
            const float* vj = vc + static_cast<std::size_t>(j) * d + off;
            acc += scores[j] * vj[i];
          }
          ctx[off + i] = static_cast<float>(acc / denom);
        }
      }
      matvec(m.param(p + "attn.wo").data.data(), ctx.data(),
             m.param(p + "attn.bo").data.data(), d, d, tmp.data());
      for (int i = 0; i < d; ++i) x[i] += tmp[i];

      layer_norm(x.data(), m.param(p + "ln2.weight").data.data(),
                 m.param(p + "ln2.bias").data.data(), d, z.data());
      matvec(m.param(p + "ff.w1").data.data(), z.data(),
             m.param(p + "ff.b1").data.data(), c.d_ff, d, ff1.data());
      for (auto& h1 : ff1) h1 = gelu(h1);
      matvec(m.param(p + "ff.w2").data.data(), ff1.data(),
             m.param(p + "ff.b2").data.data(), d, c.d_ff, tmp.data());
      for (int i = 0; i < d; ++i) x[i] += tmp[i];

      // Residual edits land after the block; alpha == 0 entries are skipped
      // so an all-zero spec is bitwise identical to no spec.
      if (iv) {
        for (const auto& e : iv->entries) {
          if (e.layer == l && e.alpha != 0.0f) {
            for (int i = 0; i < d; ++i) x[i] += e.alpha * e.vector[i];
          }
        }
      }
      if (on_residual) on_residual(l, pos, x.data());
    }

    layer_norm(x.data(), m.param("ln_f.weight").data.data(),
               m.param("ln_f.bias").data.data(), d, z.data());
    // Weight-tied output head: logits against token embeddings.
    std::vector<float> logits(c.vocab_size);
    matvec(m.param("tok_emb").data.data(), z.data(), nullptr, c.vocab_size, d,
           logits.data());
    ++pos;
    return logits;
  }
};

Session::Session(const ModelHandle& model) : model_(&model) {}

void Session::set_interventions(InterventionSpec spec) {
  spec.check(model_->config());
  interventions_ = std::move(spec);
}

void Session::clear_interventions() { interventions_ = {}; }

void Session::request_capture(int layer, int position) {
  if (layer < 0 || layer >= model_->config().n_layers) {
    throw Error(Errc::bad_config, "capture layer out of range");
  }
  if (position < kLastPosition) {
    throw Error(Errc::bad_config, "capture position out of range");
  }
  capture_requests_.emplace_back(layer, position);
}

void Session::clear_captures() {
  capture_requests_.clear();
  captured_.clear();
}

const std::vector<float>& Session::captured(int layer, int position) const {
  auto it = captured_.find({layer, position});
  if (it == captured_.end()) {
    throw Error(Errc::bad_argument, "no capture for layer " +
                                        std::to_string(layer) + " position " +
                                        std::to_string(position));
  }
  return it->second;
}

std::vector<float> Session::run_prompt(Decoder& dec,
                                       std::span<const Token> tokens,
                                       bool collect_captures) {
  if (tokens.empty()) throw Error(Errc::bad_argument, "empty token sequence");
  if (tokens.size() > static_cast<std::size_t>(model_->config().max_seq)) {
    throw Error(Errc::sequence_too_long,
                std::to_string(tokens.size()) + " tokens > max_seq");
  }
  if (collect_captures) captured_.clear();
  if (collect_captures && !capture_requests_.empty()) {
    const int last = static_cast<int>(tokens.size()) - 1;
    const int d = model_->config().d_model;
    dec.on_residual = [this, last, d](int layer, int position,
                                      const float* residual) {
      for (const auto& [want_layer, want_pos] : capture_requests_) {
        int resolved = want_pos == kLastPosition ? last : want_pos;
        if (want_layer == layer && resolved == position) {
          captured_[{want_layer, want_pos}] =
              std::vector<float>(residual, residual + d);
        }
      }
    };
  }
  std::vector<float> logits;
  for (Token t : tokens) logits = dec.step(t);
  dec.on_residual = nullptr;
  return logits;
}

std::vector<float> Session::forward_last_logits(std::span<const Token> tokens) {
  interventions_.check(model_->config());
  Decoder dec(*model_, &interventions_);
  return run_prompt(dec, tokens, /*collect_captures=*/true);
}

namespace {

// Raw softmax probabilities in double, stable against large logits.
std::vector<double> softmax_double(const std::vector<float>& logits,
                                   double inv_temp = 1.0) {
  double mx = -1e300;
  for (float l : logits) {
    if (!std::isfinite(l)) {
      throw Error(Errc::backend_failure, "non-finite logit");
    }
    mx = std::max(mx, static_cast<double>(l));
  }
  std::vector<double> p(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((static_cast<double>(logits[i]) - mx) * inv_temp);
    denom += p[i];
  }
  for (auto& x : p) x /= denom;
  return p;
}

Token greedy_argmax(const std::vector<float>& logits) {
  Token best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = static_cast<Token>(i);
  }
  return best;
}

Token sample_token(const std::vector<float>& logits, double temperature,
                   Rng& rng) {
  if (temperature == 0.0) return greedy_argmax(logits);
  std::vector<double> p = softmax_double(logits, 1.0 / temperature);
  double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cdf += p[i];
    if (u < cdf) return static_cast<Token>(i);
  }
  return static_cast<Token>(p.size() - 1);  // guard against rounding at 1.0
}

}  // namespace

std::vector<Token> Session::generate(std::span<const Token> prompt, int max_new,
                                     double temperature,
                                     std::uint64_t gen_seed) {
  if (max_new < 1) throw Error(Errc::bad_argument, "max_new must be >= 1");
  if (temperature < 0.0) {
    throw Error(Errc::bad_argument, "temperature must be >= 0");
  }
  interventions_.check(model_->config());
  if (prompt.size() >= static_cast<std::size_t>(model_->config().max_seq)) {
    throw Error(Errc::sequence_too_long, "prompt leaves no room to generate");
  }
  Decoder dec(*model_, &interventions_);
  std::vector<float> logits = run_prompt(dec, prompt, false);
  Rng rng(gen_seed);
  std::vector<Token> out;
  for (int i = 0; i < max_new; ++i) {
    Token t = sample_token(logits, temperature, rng);
    if (t == kEosToken) break;
    out.push_back(t);
    if (dec.pos >= model_->config().max_seq) break;  // context exhausted
    if (i + 1 < max_new) logits = dec.step(t);
  }
  return out;
}

double Session::perplexity(std::span<const Token> prompt, int window,
                           double temperature, std::uint64_t gen_seed,
                           bool score_with_baseline) {
  if (window < 1) throw Error(Errc::bad_argument, "window must be >= 1");
  if (temperature < 0.0) {
    throw Error(Errc::bad_argument, "temperature must be >= 0");
  }
  interventions_.check(model_->config());
  if (prompt.size() >= static_cast<std::size_t>(model_->config().max_seq)) {
    throw Error(Errc::sequence_too_long, "prompt leaves no room to generate");
  }
  Decoder dec(*model_, &interventions_);
  std::vector<float> logits = run_prompt(dec, prompt, false);
  Rng rng(gen_seed);
  std::vector<Token> continuation;
  double nll = 0.0;
  for (int i = 0; i < window; ++i) {
    Token t = sample_token(logits, temperature, rng);
    if (t == kEosToken) break;
    continuation.push_back(t);
    if (!score_with_baseline) {
      // Scored under the raw (untempered) next-token distribution of the
      // same steered pass that produced the token.
      std::vector<double> p = softmax_double(logits);
      nll -= std::log(p[static_cast<std::size_t>(t)]);
    }
    if (dec.pos >= model_->config().max_seq) break;
    if (i + 1 < window) logits = dec.step(t);
  }
  if (continuation.empty()) {
    throw Error(Errc::empty_continuation, "first sampled token was EOS");
  }
  if (score_with_baseline) {
    Decoder base(*model_, nullptr);
    std::vector<float> blogits = run_prompt(base, prompt, false);
    for (std::size_t i = 0; i < continuation.size(); ++i) {
      std::vector<double> p = softmax_double(blogits);
      nll -= std::log(p[static_cast<std::size_t>(continuation[i])]);
      if (i + 1 < continuation.size()) blogits = base.step(continuation[i]);
    }
  }
  return std::exp(nll / static_cast<double>(continuation.size()));
}

}  // namespace culturesteer
