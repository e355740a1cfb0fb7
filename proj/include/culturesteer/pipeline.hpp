// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_PIPELINE_HPP_
#define CULTURESTEER_PIPELINE_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "culturesteer/analysis.hpp"
#include "culturesteer/dataset.hpp"
#include "culturesteer/model.hpp"
#include "culturesteer/persona.hpp"
#include "culturesteer/probing.hpp"
#include "culturesteer/steering.hpp"

namespace culturesteer {

// Declarative run configuration. Defaults are the published experimental
// constants; precedence is flags > environment > config file > defaults.
struct RunConfig {
  ModelConfig model;
  std::optional<std::string> weights_path;
  std::string dataset_path;

  std::uint64_t global_seed = 42;
  double temperature = 0.7;
  int ppl_window = 128;
  double alpha = 0.2;
  double alpha_cap = 0.4;
  bool force = false;
  int top_k = 4;
  double threshold = 0.25;
  double split_ratio = 0.5;
  Axis axis = Axis::x;

  PersonaKind persona_kind = PersonaKind::none;
  std::string persona_country;
  std::optional<std::string> stats_path;
  std::optional<std::string> codebook_path;
  std::optional<std::string> names_path;

  WvsRangeConfig wvs_ranges = WvsRangeConfig::defaults();
  ProjectionConfig projection;
  std::optional<std::string> anchors_path;

  std::string out_dir = "out";
  int jobs = 1;

  std::vector<double> ppl_alphas = {0.0, 0.1, 0.2, 0.4};
  int ppl_prompts = 4;
  bool ppl_score_with_baseline = false;

  static RunConfig from_file(const std::filesystem::path& path);
  void apply_json_text(const std::string& text);

  ModelHandle load() const;
  std::filesystem::path out(const std::string& name) const;
  std::optional<PersonaProfile> build_persona() const;
};

// Pipeline stages. Each writes its artifacts under config.out_dir, reuses
// compatible artifacts already present (file-based resumability), and throws
// Error on failure.
void cmd_probe(const RunConfig& config);
void cmd_layer_search(const RunConfig& config);
void cmd_steer(const RunConfig& config);
void cmd_analyze(const RunConfig& config, const std::string& subcommand);
int cmd_validate(const RunConfig& config, std::string* report_json);

// Artifact filenames under out_dir.
std::string vectors_filename(Axis axis);
inline constexpr const char* kProbeResultsFile = "probe_results.jsonl";
inline constexpr const char* kScoresFile = "scores.csv";
inline constexpr const char* kScoresByDomainFile = "scores_by_domain.csv";
inline constexpr const char* kCoordinateFile = "coordinate.json";
inline constexpr const char* kLayerSearchJson = "layer_search.json";
inline constexpr const char* kLayerSearchCsv = "layer_search.csv";
inline constexpr const char* kSteeredResultsFile = "steered_results.jsonl";
inline constexpr const char* kBaselineCoordFile = "coordinate_baseline.json";
inline constexpr const char* kSteeredCoordFile = "coordinate_steered.json";
inline constexpr const char* kEntanglementFile = "entanglement.json";
inline constexpr const char* kDistancesFile = "distances.csv";
inline constexpr const char* kHeatmapCsv = "heatmap.csv";
inline constexpr const char* kHeatmapJson = "heatmap.json";
inline constexpr const char* kCorrelationFile = "correlation.json";
inline constexpr const char* kPplCurveFile = "ppl_curve.csv";
inline constexpr const char* kMapSvgFile = "map.svg";
inline constexpr const char* kPplSvgFile = "ppl_curve.svg";

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace culturesteer

#endif  // CULTURESTEER_PIPELINE_HPP_
