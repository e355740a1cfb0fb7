// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_ANALYSIS_HPP_
#define CULTURESTEER_ANALYSIS_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "culturesteer/dataset.hpp"
#include "culturesteer/probing.hpp"
#include "culturesteer/steering.hpp"

namespace culturesteer {

// Affine map from raw axis means to plane coordinates:
// coord = offset + scale * (2 * axis_raw - 1).
struct ProjectionConfig {
  double offset_x = 0.0;
  double offset_y = 0.0;
  double scale_x = 2.5;
  double scale_y = 2.5;
};

struct CulturalCoordinate {
  double x = 0;  // Survival <-> Self-Expression
  double y = 0;  // Traditional <-> Secular-Rational
  std::map<std::string, double> per_question;  // qid -> mean_p
  std::string label;

  std::string to_json() const;
  static CulturalCoordinate from_json(const std::string& text);
};

struct EntanglementRecord {
  Axis target_axis = Axis::x;
  double delta_intended = 0;
  double delta_unintended = 0;
  double e = 0;

  std::string to_json() const;
};

struct DomainShiftMatrix {
  Axis axis_steered = Axis::x;
  double alpha = 0;
  // (source domain, target domain) -> (dx, dy).
  std::map<std::pair<Domain, Domain>, std::pair<double, double>> cells;

  std::string to_csv() const;
  std::string to_json() const;
};

struct HumanAnchors {
  std::map<std::string, std::pair<double, double>> coords;  // country -> (x, y)
};

HumanAnchors load_anchors(const std::filesystem::path& path);

// Uniform per-axis mean of mean_p (duplicate qids combined by n-weighted
// mean first), then the affine calibration.
CulturalCoordinate project(const std::vector<QuestionScore>& scores,
                           const ProjectionConfig& calibration,
                           const std::string& label = "");

// E = |delta unintended| / |delta intended|, deltas = steered - baseline.
EntanglementRecord entanglement(const CulturalCoordinate& baseline,
                                const CulturalCoordinate& steered,
                                Axis target_axis);

double distance(const CulturalCoordinate& model_coord,
                const HumanAnchors& anchors, const std::string& country);

// Pearson correlation between the two anchor axes over countries.
double axis_correlation(const HumanAnchors& anchors);

// Least-squares fit of (offset, scale) per axis so projected raw means land
// near the given human coordinates. Requires >= 2 distinct raw values per
// axis.
ProjectionConfig calibrate(
    const std::vector<std::pair<CulturalCoordinate, std::pair<double, double>>>&
        model_vs_human);

// Cross-domain transfer: cell (s, t) is the coordinate shift on probe set t
// using vectors extracted from domain s, at the given layers and alpha.
// Baselines are computed once per target domain.
DomainShiftMatrix domain_matrix(
    const std::map<Domain, SteeringVectorSet>& runs, const ModelHandle& model,
    const std::map<Domain, std::vector<LabeledScenario>>& probe_sets,
    double alpha, Axis axis, const std::vector<int>& layers,
    const ProjectionConfig& calibration, int jobs = 1);

// Mean perplexity over prompts per alpha. Requires 0 in alphas; the alpha=0
// entry is bitwise the unsteered baseline. Per-prompt generation seeds are
// hash64(gen_seed, "ppl:" + prompt index).
std::vector<std::pair<double, double>> perplexity_curve(
    const ModelHandle& model, const SteeringVectorSet& vectors,
    const std::vector<int>& layers, const std::vector<double>& alphas,
    const std::vector<std::string>& prompts, int window, double temperature,
    std::uint64_t gen_seed, bool score_with_baseline = false, int jobs = 1);

}  // namespace culturesteer

#endif  // CULTURESTEER_ANALYSIS_HPP_
