// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_STEERING_HPP_
#define CULTURESTEER_STEERING_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "culturesteer/dataset.hpp"
#include "culturesteer/model.hpp"
#include "culturesteer/probing.hpp"

namespace culturesteer {

// Contrastive text pair for one scenario: shared situation prefix, pole-
// opposed suffixes.
struct ContrastPair {
  std::string scenario_id;
  std::string text_pos;  // situation + " " + high-pole option
  std::string text_neg;  // situation + " " + low-pole option
};

// Per-layer mean-difference direction set for one axis.
struct SteeringVectorSet {
  Axis axis = Axis::x;
  int n = 0;  // pair count
  std::map<int, std::vector<float>> vectors;  // layer -> d_model direction

  const std::vector<float>& at(int layer) const;
};

struct LayerSearchReport {
  double alpha = 0;
  double threshold = 0;
  // (layer, qid) -> mean over scenarios of p_steered - p_baseline.
  std::map<std::pair<int, std::string>, double> cells;
  std::map<int, double> layer_means;  // layer -> mean |differential| over qids
  std::vector<int> selected;          // top-k by layer_mean, ties -> lower index

  // Per-qid best layer over the full grid (the summary view); pairs the
  // winning layer with its differential and whether |d| clears threshold.
  struct QidMax {
    int layer = 0;
    double differential = 0;
    bool meets_threshold = false;
  };
  std::map<std::string, QidMax> qid_max() const;

  std::string to_json() const;
  std::string to_csv() const;
};

std::vector<ContrastPair> build_pairs(const std::vector<Scenario>& scenarios,
                                      Axis axis);

// Mean over pairs of (final-token residual of text_pos - of text_neg), per
// layer. Sums accumulate in double in pair-index order.
SteeringVectorSet extract_vectors(const ModelHandle& model,
                                  const std::vector<ContrastPair>& pairs,
                                  Axis axis, int jobs = 1);

// Baseline probe pass, then one steered pass per layer applying only that
// layer's vector at `alpha`; ranks layers by mean absolute per-qid
// differential.
LayerSearchReport layer_search(const ModelHandle& model,
                               const SteeringVectorSet& vectors,
                               const std::vector<LabeledScenario>& probe_set,
                               double alpha, int k = 4,
                               double threshold = 0.25, int jobs = 1);

inline constexpr double kDefaultAlphaCap = 0.4;

// Probes every scenario under interventions [(L, v_L, alpha) for L in layers].
std::vector<ProbeResult> steered_probe(
    const ModelHandle& model, const SteeringVectorSet& vectors,
    const std::vector<int>& layers, double alpha,
    const std::vector<LabeledScenario>& probe_set,
    const PersonaProfile* persona = nullptr, double alpha_cap = kDefaultAlphaCap,
    bool force = false, int jobs = 1);

InterventionSpec make_interventions(const SteeringVectorSet& vectors,
                                    const std::vector<int>& layers,
                                    double alpha);

void save_vectors(const std::filesystem::path& path,
                  const SteeringVectorSet& set);
SteeringVectorSet load_vectors(const std::filesystem::path& path);

}  // namespace culturesteer

#endif  // CULTURESTEER_STEERING_HPP_
