// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_PROBING_HPP_
#define CULTURESTEER_PROBING_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "culturesteer/dataset.hpp"
#include "culturesteer/model.hpp"
#include "culturesteer/persona.hpp"

namespace culturesteer {

struct ProbeResult {
  std::string scenario_id;
  LabelKey key = LabelKey::high_is_a;
  double logit_a = 0;
  double logit_b = 0;
  double p_high = 0;  // probability mass on the positive-pole option
  PersonaKind persona_kind = PersonaKind::none;
  std::optional<std::string> country;
  std::string prompt;  // rendered prompt, logged for auditability
};

struct QuestionScore {
  std::string qid;
  std::optional<Domain> domain;
  double mean_p = 0;
  int n = 0;
  std::optional<double> rescaled;
};

struct WvsRange {
  double min = 0;
  double max = 1;
  bool high_pole_at_max = true;
};

struct WvsRangeConfig {
  std::map<std::string, WvsRange> ranges;  // qid -> range

  static WvsRangeConfig defaults();
};

// Scenario block of the probe prompt (no persona), with the option letters
// arranged per the label key.
std::string render_body(const LabeledScenario& labeled);

// Full prompt: persona text (when given) prepended as a system preamble
// separated by a blank line.
std::string render_prompt(const LabeledScenario& labeled,
                          const PersonaProfile* persona);

// Positive-pole probability from the two option-letter logits, numerically
// stable against large magnitudes.
double compute_p(double logit_a, double logit_b, LabelKey key);

// Anything that turns a probe body (+ optional system text) into the two
// option-letter logits: the in-process model, a subprocess backend, or a
// rigged test double. Implementations need not be thread-safe; use one
// scorer per worker.
class OptionScorer {
 public:
  virtual ~OptionScorer() = default;
  // Returns (logit of letter A, logit of letter B).
  virtual std::pair<double, double> option_logits(
      const std::string& body, const std::optional<std::string>& system_text) = 0;
};

// Scorer over the in-process model. Holds its own Session; interventions are
// applied to every forward pass.
class TinyModelScorer : public OptionScorer {
 public:
  explicit TinyModelScorer(const ModelHandle& model,
                           InterventionSpec interventions = {});
  std::pair<double, double> option_logits(
      const std::string& body,
      const std::optional<std::string>& system_text) override;

  Session& session() { return session_; }

 private:
  Session session_;
};

ProbeResult probe(OptionScorer& scorer, const LabeledScenario& labeled,
                  const PersonaProfile* persona);

enum class GroupBy { qid, qid_domain };

// Arithmetic mean of p_high per group. Records are summed in scenario_id
// order so the result is independent of input permutation bit-for-bit.
std::vector<QuestionScore> aggregate(const std::vector<ProbeResult>& results,
                                     const std::vector<Scenario>& dataset,
                                     GroupBy group_by);

QuestionScore rescale(const QuestionScore& score, const WvsRangeConfig& config);

// JSON-lines persistence (one ProbeResult per line).
void write_probe_jsonl(const std::filesystem::path& path,
                       const std::vector<ProbeResult>& results);
std::vector<ProbeResult> read_probe_jsonl(const std::filesystem::path& path);
std::string probe_result_to_json(const ProbeResult& r);
ProbeResult probe_result_from_json(const std::string& line);

std::string scores_to_csv(const std::vector<QuestionScore>& scores);

}  // namespace culturesteer

#endif  // CULTURESTEER_PROBING_HPP_
