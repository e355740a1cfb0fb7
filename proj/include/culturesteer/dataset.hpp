// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_DATASET_HPP_
#define CULTURESTEER_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "culturesteer/common.hpp"

namespace culturesteer {

// A forced-choice situational dilemma tied to one survey question.
// option_low carries the Traditional / Survival pole, option_high the
// Secular-Rational / Self-Expression pole.
struct Scenario {
  std::string id;
  std::string wvs_id;
  std::string qid;  // X01..X05 / Y01..Y05
  Axis axis = Axis::x;
  Domain domain = Domain::family;
  std::string scenario_text;
  std::string option_low;
  std::string option_high;
};

// Which answer letter carries the positive pole in one trial.
enum class LabelKey { high_is_a, high_is_b };

const char* label_key_name(LabelKey k);  // "HighIsA" / "HighIsB"

struct LabeledScenario {
  Scenario scenario;
  LabelKey key = LabelKey::high_is_a;
  std::uint64_t seed_trace = 0;
};

struct DatasetSplit {
  std::vector<Scenario> optimization;
  std::vector<Scenario> evaluation;
};

struct ValidationReport {
  std::size_t total = 0;
  std::map<std::string, std::size_t> per_domain;
  std::map<std::string, std::size_t> per_qid;
  std::map<std::string, std::size_t> per_cell;  // "qid/domain"
  bool pass = false;
  std::vector<std::string> failures;

  std::string to_json() const;
};

// Fixed question-code correspondence. Throws UnknownWvsId outside the set.
std::string qid_for_wvs(const std::string& wvs_id);
std::string wvs_for_qid(const std::string& qid);
Axis axis_for_qid(const std::string& qid);
const std::vector<std::string>& all_wvs_ids();  // canonical order
const std::vector<std::string>& all_qids();

// Dataset ingest. The file is a JSON array of objects with keys wvs_id,
// dimension, domain, scenario_text, options{A,B}, mapping; unknown keys are
// collected into `warnings` (or logged to stderr by the path overload).
std::vector<Scenario> parse_dataset(const std::string& json_text,
                                    std::vector<std::string>* warnings = nullptr);
std::vector<Scenario> load_dataset(const std::filesystem::path& path);
std::string serialize_dataset(const std::vector<Scenario>& scenarios);
void save_dataset(const std::filesystem::path& path,
                  const std::vector<Scenario>& scenarios);

ValidationReport validate(const std::vector<Scenario>& dataset);

// Deterministic stratified split. Within each (qid, domain) cell items are
// ordered by id, shuffled by a generator seeded from (global_seed, qid,
// domain), and the first ceil(ratio * cell) go to optimization.
DatasetSplit split(const std::vector<Scenario>& dataset,
                   std::uint64_t global_seed, double ratio);

// key = HighIsA iff the low bit of hash64(global_seed, id) is 0.
LabeledScenario assign_label(const Scenario& scenario,
                             std::uint64_t global_seed);
std::vector<LabeledScenario> assign_labels(const std::vector<Scenario>& v,
                                           std::uint64_t global_seed);

struct GenerationConfig {
  std::vector<std::string> wvs_ids;  // empty = all 10, canonical order
  std::vector<std::string> domains;  // empty = workplace, family, legal
};

// Scenario-authoring prompt for a teacher model, with the configured id and
// domain lists interpolated.
std::string emit_generation_prompt(const GenerationConfig& config);

// Deterministic synthetic corpus in the canonical 10 x 3 x per_cell layout.
// Stands in for the teacher-generated dataset; text content is varied enough
// to exercise the tokenizer and uneven enough to avoid accidental symmetry.
std::vector<Scenario> synthetic_dataset(int per_cell = 20,
                                        std::uint64_t seed = 7);

}  // namespace culturesteer

#endif  // CULTURESTEER_DATASET_HPP_
