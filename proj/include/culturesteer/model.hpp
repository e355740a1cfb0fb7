// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_MODEL_HPP_
#define CULTURESTEER_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "culturesteer/common.hpp"

namespace culturesteer {

// ---------------------------------------------------------------------------
// Named float32 tensors and their on-disk container. The file is one JSON
// header line (names, shapes, dtype) followed by the little-endian float
// payload in header order; see docs/formats.md.
// ---------------------------------------------------------------------------

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::size_t numel() const;
};

struct TensorFile {
  std::string kind;  // free-form tag, e.g. "model-weights" or "steering-vectors"
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;  // header order
};

void write_tensor_file(const std::filesystem::path& path, const TensorFile& tf);
TensorFile read_tensor_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Byte-level tokenizer: BOS=0, EOS=1, PAD=2, byte b -> b + 3. "A" and "B" are
// single tokens by construction.
// ---------------------------------------------------------------------------

using Token = int;

inline constexpr Token kBosToken = 0;
inline constexpr Token kEosToken = 1;
inline constexpr Token kPadToken = 2;
inline constexpr Token kByteOffset = 3;
inline constexpr int kByteVocab = 259;

std::vector<Token> encode(std::string_view text);
std::string decode(std::span<const Token> tokens);

// ---------------------------------------------------------------------------
// Deterministic decoder-only transformer: pre-LN blocks, learned positional
// embeddings, GELU feed-forward, weight-tied output head.
// ---------------------------------------------------------------------------

struct ModelConfig {
  int vocab_size = kByteVocab;
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 256;
  int max_seq = 512;
  std::uint64_t init_seed = 42;

  void check() const;  // throws BadConfig on violated invariants
};

// Immutable parameter store. Share freely across threads.
class ModelHandle {
 public:
  // Seeded initialization: every weight tensor is drawn from a per-tensor
  // stream seeded by hash64(init_seed, tensor_name); matrices and embeddings
  // are N(0,1)/sqrt(d_model), layer-norm gains 1, biases 0.
  explicit ModelHandle(const ModelConfig& config);
  ModelHandle(const ModelConfig& config, const std::filesystem::path& weights);
  ModelHandle(const ModelConfig& config, TensorFile weights);

  const ModelConfig& config() const { return config_; }
  const Tensor& param(const std::string& name) const;
  bool has_param(const std::string& name) const;
  std::vector<std::string> param_names() const;  // canonical order

  void save(const std::filesystem::path& path) const;

 private:
  void adopt(TensorFile tf);
  ModelConfig config_;
  std::map<std::string, Tensor> params_;
};

ModelHandle load_model(const ModelConfig& config,
                       const std::optional<std::filesystem::path>& weights_path =
                           std::nullopt);

// One additive residual-stream edit: alpha * vector is added at the output of
// block `layer`, at every position. alpha == 0 entries are skipped entirely.
struct Intervention {
  int layer = 0;
  std::vector<float> vector;
  float alpha = 0.0f;
};

struct InterventionSpec {
  std::vector<Intervention> entries;

  void check(const ModelConfig& config) const;
  bool active() const;  // any entry with alpha != 0
};

// Mutable per-thread forward state over a shared handle. Not thread-safe;
// use one Session per worker.
class Session {
 public:
  explicit Session(const ModelHandle& model);

  const ModelHandle& model() const { return *model_; }

  void set_interventions(InterventionSpec spec);
  void clear_interventions();
  const InterventionSpec& interventions() const { return interventions_; }

  // position >= 0 is absolute; kLastPosition resolves to the final token of
  // the next forward pass. Captures read the residual after block output and
  // after any intervention at that layer.
  static constexpr int kLastPosition = -1;
  void request_capture(int layer, int position);
  void clear_captures();
  const std::vector<float>& captured(int layer, int position) const;

  // Pre-softmax logits at the final position.
  std::vector<float> forward_last_logits(std::span<const Token> tokens);

  // Sampled continuation, excluding the terminating EOS. temperature 0 is
  // greedy argmax with ties to the lowest token id.
  std::vector<Token> generate(std::span<const Token> prompt, int max_new,
                              double temperature, std::uint64_t gen_seed);

  // Generates up to `window` tokens under the session's interventions, then
  // returns exp(mean NLL) of those tokens. By default the same steered
  // session scores its own continuation; score_with_baseline re-scores the
  // continuation under the handle without interventions.
  double perplexity(std::span<const Token> prompt, int window,
                    double temperature, std::uint64_t gen_seed,
                    bool score_with_baseline = false);

 private:
  struct Decoder;
  std::vector<float> run_prompt(Decoder& dec, std::span<const Token> tokens,
                                bool collect_captures);

  const ModelHandle* model_;
  InterventionSpec interventions_;
  std::vector<std::pair<int, int>> capture_requests_;
  std::map<std::pair<int, int>, std::vector<float>> captured_;
};

// Canonical tensor names and shapes for a config, in save order.
std::vector<std::pair<std::string, std::vector<std::int64_t>>> expected_tensors(
    const ModelConfig& config);

}  // namespace culturesteer

#endif  // CULTURESTEER_MODEL_HPP_
