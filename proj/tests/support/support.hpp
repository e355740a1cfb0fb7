// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_TESTS_SUPPORT_HPP_
#define CULTURESTEER_TESTS_SUPPORT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "culturesteer/analysis.hpp"
#include "culturesteer/backend.hpp"
#include "culturesteer/dataset.hpp"
#include "culturesteer/model.hpp"
#include "culturesteer/persona.hpp"
#include "culturesteer/pipeline.hpp"
#include "culturesteer/probing.hpp"
#include "culturesteer/steering.hpp"

namespace testsupport {

using namespace culturesteer;

std::filesystem::path data_dir();
std::filesystem::path cli_path();

// Self-cleaning unique directory under the system temp root.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

struct CliResult {
  int exit_code = -1;
  std::string out;
};

// Runs the built CLI with stdout+stderr merged into `out`.
CliResult run_cli(const std::vector<std::string>& args,
                  const std::string& stdin_text = "");

// Small random-weight model for throughput-sensitive tests.
ModelConfig tiny_config();

// ---------------------------------------------------------------------------
// Planted model: a 3-block transformer with zeroed attention, identity
// blocks 0 and 1, and a hand-built gate in block 2's feed-forward.
//
// Residual directions (pairwise orthogonal, zero-sum, unit norm):
//   u  - moves the option-letter logit gap, but only on marked prompts
//   mv - moves the gap only on unmarked prompts
//   q  - position-parity marker carried by odd positional embeddings
//   z  - base content of the final prompt token '?'
//   g  - gate output direction read by the tied head rows for 'A'/'B'
//   w0, w2 - inert directions used as decoy per-layer steering vectors
//
// Injections after block `steer_layer` (= 1) reach block 2's gate; the gate
// emits r * (u or mv component) along g, and the head turns that into a
// logit gap of roughly 2 c r alpha / (sigma_ln2 sigma_f). Marked prompts are
// those whose final token position is odd.
// ---------------------------------------------------------------------------
struct PlantedModel {
  ModelConfig config;
  std::vector<float> u, mv, q, z, g, w0, w2;
  int steer_layer = 1;
  float beta = 0.5f;    // marker magnitude in odd positional rows
  float kappa = 12.0f;  // gate sharpness
  float r = 0.3f;       // gate output magnitude
  float c = 1.5f;       // head readout magnitude

  ModelHandle handle() const;
  // Per-layer set: the real direction at steer_layer, inert decoys elsewhere.
  // Axis y plants u (marked prompts respond); axis x plants mv.
  SteeringVectorSet vector_set(Axis axis) const;

  TensorFile weights;
};

PlantedModel make_planted_model();

// Scenarios for the planted model: every id labels as HighIsA under
// `global_seed`, and each body is padded so its final token position is odd
// exactly for Y-axis questions (the planted marker). Covers all ten qids.
std::vector<Scenario> planted_scenarios(int per_qid, std::uint64_t global_seed);

// Identity-block model whose next-token logits approximate `desired` after
// any prompt ending in 'Z' (missing tokens score ~0). Rows are built from a
// shared direction, so equal desired values give bitwise-equal logits.
ModelHandle logit_rig_model(const std::map<Token, double>& desired);

// Residual at the final position after every block, in layer order.
std::vector<std::vector<float>> capture_all_layers(const ModelHandle& model,
                                                   const std::string& text,
                                                   const InterventionSpec& spec = {});

// Extended-precision two-option softmax, the oracle for compute_p.
long double softmax_pair_ld(long double z_pos, long double z_neg);

}  // namespace testsupport

#endif  // CULTURESTEER_TESTS_SUPPORT_HPP_
