// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "culturesteer/svg.hpp"

namespace culturesteer {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::io_error, "short write to " + path.string());
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

void RunConfig::apply_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("config: ") + e.what());
  }
  try {
    if (j.contains("model")) {
      const json& m = j["model"];
      model.vocab_size = m.value("vocab_size", model.vocab_size);
      model.d_model = m.value("d_model", model.d_model);
      model.n_layers = m.value("n_layers", model.n_layers);
      model.n_heads = m.value("n_heads", model.n_heads);
      model.d_ff = m.value("d_ff", model.d_ff);
      model.max_seq = m.value("max_seq", model.max_seq);
      model.init_seed = m.value("init_seed", model.init_seed);
    }
    if (j.contains("weights_path")) weights_path = j["weights_path"].get<std::string>();
    if (j.contains("dataset")) dataset_path = j["dataset"].get<std::string>();
    global_seed = j.value("global_seed", global_seed);
    temperature = j.value("temperature", temperature);
    ppl_window = j.value("ppl_window", ppl_window);
    alpha = j.value("alpha", alpha);
    alpha_cap = j.value("alpha_cap", alpha_cap);
    force = j.value("force", force);
    top_k = j.value("top_k", top_k);
    threshold = j.value("threshold", threshold);
    split_ratio = j.value("split_ratio", split_ratio);
    if (j.contains("axis")) axis = parse_axis(j["axis"].get<std::string>());
    if (j.contains("persona")) {
      const json& p = j["persona"];
      if (p.contains("kind")) {
        persona_kind = parse_persona_kind(p["kind"].get<std::string>());
      }
      persona_country = p.value("country", persona_country);
      if (p.contains("stats")) stats_path = p["stats"].get<std::string>();
      if (p.contains("codebook")) codebook_path = p["codebook"].get<std::string>();
      if (p.contains("names")) names_path = p["names"].get<std::string>();
    }
    if (j.contains("wvs_ranges")) {
      for (auto it = j["wvs_ranges"].begin(); it != j["wvs_ranges"].end(); ++it) {
        WvsRange r;
        r.min = it.value().at("min").get<double>();
        r.max = it.value().at("max").get<double>();
        r.high_pole_at_max = it.value().at("high_pole_at_max").get<bool>();
        wvs_ranges.ranges[it.key()] = r;
      }
    }
    if (j.contains("projection")) {
      const json& p = j["projection"];
      projection.offset_x = p.value("offset_x", projection.offset_x);
      projection.offset_y = p.value("offset_y", projection.offset_y);
      projection.scale_x = p.value("scale_x", projection.scale_x);
      projection.scale_y = p.value("scale_y", projection.scale_y);
    }
    if (j.contains("anchors")) anchors_path = j["anchors"].get<std::string>();
    out_dir = j.value("out_dir", out_dir);
    jobs = j.value("jobs", jobs);
    if (j.contains("ppl_alphas")) {
      ppl_alphas = j["ppl_alphas"].get<std::vector<double>>();
    }
    ppl_prompts = j.value("ppl_prompts", ppl_prompts);
    ppl_score_with_baseline =
        j.value("ppl_score_with_baseline", ppl_score_with_baseline);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig c;
  c.apply_json_text(read_text_file(path));
  return c;
}

ModelHandle RunConfig::load() const {
  if (weights_path) return ModelHandle(model, std::filesystem::path(*weights_path));
  return ModelHandle(model);
}

std::filesystem::path RunConfig::out(const std::string& name) const {
  return std::filesystem::path(out_dir) / name;
}

std::optional<PersonaProfile> RunConfig::build_persona() const {
  switch (persona_kind) {
    case PersonaKind::none:
      return std::nullopt;
    case PersonaKind::basic:
      return build_basic(persona_country);
    case PersonaKind::advanced: {
      if (!stats_path || !codebook_path) {
        throw Error(Errc::bad_config,
                    "advanced persona needs stats and codebook paths");
      }
      CountryStats stats = load_stats(*stats_path);
      Codebook codebook = load_codebook(*codebook_path);
      std::map<std::string, std::string> names =
          names_path ? load_names(*names_path) : default_names();
      return build_advanced(persona_country, stats, codebook, names);
    }
  }
  return std::nullopt;
}

std::string vectors_filename(Axis axis) {
  return std::string("vectors_") + axis_name(axis) + ".bin";
}

// ---------------------------------------------------------------------------
// Shared stage helpers
// ---------------------------------------------------------------------------

namespace {

void ensure_out_dir(const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    throw Error(Errc::io_error, "cannot create " + config.out_dir + ": " +
                                    ec.message());
  }
}

std::vector<Scenario> load_config_dataset(const RunConfig& config) {
  if (config.dataset_path.empty()) {
    throw Error(Errc::bad_config, "no dataset path configured");
  }
  return load_dataset(config.dataset_path);
}

std::vector<ProbeResult> probe_many(const ModelHandle& model,
                                    const InterventionSpec& spec,
                                    const std::vector<LabeledScenario>& probes,
                                    const PersonaProfile* persona, int jobs) {
  std::vector<ProbeResult> results(probes.size());
  parallel_for(probes.size(), jobs, [&](std::size_t i) {
    TinyModelScorer scorer(model, spec);
    results[i] = probe(scorer, probes[i], persona);
  });
  return results;
}

std::vector<QuestionScore> rescale_all(std::vector<QuestionScore> scores,
                                       const WvsRangeConfig& ranges) {
  for (auto& s : scores) s = rescale(s, ranges);
  return scores;
}

CulturalCoordinate read_coordinate(const RunConfig& config,
                                   const std::string& name,
                                   const std::string& producer) {
  auto path = config.out(name);
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::missing_artifact,
                path.string() + " not found; run 'culturesteer " + producer +
                    "' first");
  }
  return CulturalCoordinate::from_json(read_text_file(path));
}

// Layer-search artifact reload: only the fields downstream stages consume.
struct SearchSummary {
  std::vector<int> selected;
  double alpha = 0;
};

SearchSummary read_search_summary(const RunConfig& config,
                                  const std::string& producer) {
  auto path = config.out(kLayerSearchJson);
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::missing_artifact,
                path.string() + " not found; run 'culturesteer " + producer +
                    "' first");
  }
  try {
    json j = json::parse(read_text_file(path));
    SearchSummary s;
    s.selected = j.at("selected").get<std::vector<int>>();
    s.alpha = j.at("alpha").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

SteeringVectorSet obtain_vectors(const RunConfig& config,
                                 const ModelHandle& model,
                                 const std::vector<Scenario>& optimization) {
  auto path = config.out(vectors_filename(config.axis));
  if (std::filesystem::exists(path)) {
    std::cerr << "reusing " << path.string() << "\n";
    return load_vectors(path);
  }
  std::vector<ContrastPair> pairs = build_pairs(optimization, config.axis);
  if (pairs.empty()) {
    throw Error(Errc::empty_axis,
                std::string("no ") + axis_name(config.axis) +
                    "-axis scenarios in the optimization split");
  }
  SteeringVectorSet vectors =
      extract_vectors(model, pairs, config.axis, config.jobs);
  save_vectors(path, vectors);
  return vectors;
}

LayerSearchReport obtain_search(const RunConfig& config,
                                const ModelHandle& model,
                                const SteeringVectorSet& vectors,
                                const std::vector<LabeledScenario>& eval_set) {
  LayerSearchReport report =
      layer_search(model, vectors, eval_set, config.alpha, config.top_k,
                   config.threshold, config.jobs);
  write_text_file(config.out(kLayerSearchJson), report.to_json() + "\n");
  write_text_file(config.out(kLayerSearchCsv), report.to_csv());
  return report;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_validate(const RunConfig& config, std::string* report_json) {
  std::vector<Scenario> dataset = load_config_dataset(config);
  ValidationReport report = validate(dataset);
  if (report_json) *report_json = report.to_json();
  return report.pass ? 0 : 2;
}

void cmd_probe(const RunConfig& config) {
  ensure_out_dir(config);
  std::vector<Scenario> dataset = load_config_dataset(config);
  ValidationReport report = validate(dataset);
  if (!report.pass) {
    std::cerr << report.to_json() << "\n";
    throw Error(Errc::invalid_dataset, "dataset failed validation");
  }

  std::optional<PersonaProfile> persona = config.build_persona();
  const PersonaProfile* persona_ptr = persona ? &*persona : nullptr;

  std::vector<ProbeResult> results;
  auto results_path = config.out(kProbeResultsFile);
  if (std::filesystem::exists(results_path)) {
    std::cerr << "reusing " << results_path.string() << "\n";
    results = read_probe_jsonl(results_path);
  } else {
    ModelHandle model = config.load();
    std::vector<LabeledScenario> labeled =
        assign_labels(dataset, config.global_seed);
    results = probe_many(model, {}, labeled, persona_ptr, config.jobs);
    write_probe_jsonl(results_path, results);
  }

  std::vector<QuestionScore> by_qid = rescale_all(
      aggregate(results, dataset, GroupBy::qid), config.wvs_ranges);
  std::vector<QuestionScore> by_cell = rescale_all(
      aggregate(results, dataset, GroupBy::qid_domain), config.wvs_ranges);
  write_text_file(config.out(kScoresFile), scores_to_csv(by_qid));
  write_text_file(config.out(kScoresByDomainFile), scores_to_csv(by_cell));

  std::string label =
      persona ? std::string(persona_kind_name(persona->kind)) + ":" +
                    persona->country
              : "baseline";
  CulturalCoordinate coord = project(by_qid, config.projection, label);
  write_text_file(config.out(kCoordinateFile), coord.to_json() + "\n");
  std::cout << "probe: " << results.size() << " scenarios -> ("
            << fmt_double(coord.x) << ", " << fmt_double(coord.y) << ")\n";
}

namespace {

struct SteerStage {
  std::vector<Scenario> dataset;
  DatasetSplit parts;
  std::vector<LabeledScenario> eval_labeled;
  SteeringVectorSet vectors;
};

SteerStage prepare_steer(const RunConfig& config, const ModelHandle& model) {
  SteerStage s;
  s.dataset = load_config_dataset(config);
  s.parts = split(s.dataset, config.global_seed, config.split_ratio);
  s.eval_labeled = assign_labels(s.parts.evaluation, config.global_seed);
  s.vectors = obtain_vectors(config, model, s.parts.optimization);
  return s;
}

}  // namespace

void cmd_layer_search(const RunConfig& config) {
  ensure_out_dir(config);
  ModelHandle model = config.load();
  SteerStage stage = prepare_steer(config, model);
  LayerSearchReport report =
      obtain_search(config, model, stage.vectors, stage.eval_labeled);
  std::cout << "layer-search: selected [";
  for (std::size_t i = 0; i < report.selected.size(); ++i) {
    std::cout << (i ? ", " : "") << report.selected[i];
  }
  std::cout << "]\n";
}

void cmd_steer(const RunConfig& config) {
  ensure_out_dir(config);
  ModelHandle model = config.load();
  SteerStage stage = prepare_steer(config, model);
  LayerSearchReport report =
      obtain_search(config, model, stage.vectors, stage.eval_labeled);

  std::vector<ProbeResult> baseline =
      probe_many(model, {}, stage.eval_labeled, nullptr, config.jobs);
  CulturalCoordinate base_coord =
      project(aggregate(baseline, stage.parts.evaluation, GroupBy::qid),
              config.projection, "baseline");
  write_text_file(config.out(kBaselineCoordFile), base_coord.to_json() + "\n");

  std::optional<PersonaProfile> persona = config.build_persona();
  std::vector<ProbeResult> steered = steered_probe(
      model, stage.vectors, report.selected, config.alpha, stage.eval_labeled,
      persona ? &*persona : nullptr, config.alpha_cap, config.force,
      config.jobs);
  write_probe_jsonl(config.out(kSteeredResultsFile), steered);
  std::string label = std::string("steered:") + axis_name(config.axis) + "@" +
                      fmt_double(config.alpha);
  CulturalCoordinate steered_coord =
      project(aggregate(steered, stage.parts.evaluation, GroupBy::qid),
              config.projection, label);
  write_text_file(config.out(kSteeredCoordFile), steered_coord.to_json() + "\n");

  EntanglementRecord rec =
      entanglement(base_coord, steered_coord, config.axis);
  write_text_file(config.out(kEntanglementFile), rec.to_json() + "\n");
  std::cout << "steer: E = " << fmt_double(rec.e) << " (intended "
            << fmt_double(rec.delta_intended) << ", unintended "
            << fmt_double(rec.delta_unintended) << ")\n";
}

namespace {

void analyze_entangle(const RunConfig& config) {
  CulturalCoordinate base = read_coordinate(config, kBaselineCoordFile, "steer");
  CulturalCoordinate steered =
      read_coordinate(config, kSteeredCoordFile, "steer");
  EntanglementRecord rec = entanglement(base, steered, config.axis);
  write_text_file(config.out(kEntanglementFile), rec.to_json() + "\n");
  std::cout << rec.to_json() << "\n";
}

HumanAnchors load_config_anchors(const RunConfig& config) {
  if (!config.anchors_path) {
    throw Error(Errc::bad_config, "no anchors path configured");
  }
  return load_anchors(*config.anchors_path);
}

void analyze_distance(const RunConfig& config) {
  CulturalCoordinate coord = read_coordinate(config, kCoordinateFile, "probe");
  HumanAnchors anchors = load_config_anchors(config);
  std::string csv = "country,anchor_x,anchor_y,model_x,model_y,distance\n";
  for (const auto& [country, xy] : anchors.coords) {
    double d = distance(coord, anchors, country);
    csv += country + "," + fmt_double(xy.first) + "," + fmt_double(xy.second) +
           "," + fmt_double(coord.x) + "," + fmt_double(coord.y) + "," +
           fmt_double(d) + "\n";
  }
  write_text_file(config.out(kDistancesFile), csv);
  std::cout << csv;
}

void analyze_heatmap(const RunConfig& config) {
  SearchSummary search = read_search_summary(config, "steer");
  ModelHandle model = config.load();
  std::vector<Scenario> dataset = load_config_dataset(config);
  DatasetSplit parts = split(dataset, config.global_seed, config.split_ratio);

  std::map<Domain, SteeringVectorSet> runs;
  std::map<Domain, std::vector<LabeledScenario>> probe_sets;
  for (Domain d : {Domain::family, Domain::workplace, Domain::legal}) {
    std::vector<Scenario> source_opt;
    for (const auto& s : parts.optimization) {
      if (s.domain == d) source_opt.push_back(s);
    }
    std::vector<ContrastPair> pairs = build_pairs(source_opt, config.axis);
    if (pairs.empty()) {
      throw Error(Errc::empty_axis,
                  std::string("no ") + axis_name(config.axis) +
                      "-axis optimization scenarios in domain " +
                      domain_name(d));
    }
    runs.emplace(d, extract_vectors(model, pairs, config.axis, config.jobs));
    std::vector<Scenario> target_eval;
    for (const auto& s : parts.evaluation) {
      if (s.domain == d) target_eval.push_back(s);
    }
    probe_sets.emplace(d, assign_labels(target_eval, config.global_seed));
  }
  DomainShiftMatrix m =
      domain_matrix(runs, model, probe_sets, config.alpha, config.axis,
                    search.selected, config.projection, config.jobs);
  write_text_file(config.out(kHeatmapCsv), m.to_csv());
  write_text_file(config.out(kHeatmapJson), m.to_json() + "\n");
  std::cout << m.to_csv();
}

void analyze_correlation(const RunConfig& config) {
  HumanAnchors anchors = load_config_anchors(config);
  double r = axis_correlation(anchors);
  nlohmann::ordered_json j;
  j["r"] = r;
  j["n"] = anchors.coords.size();
  write_text_file(config.out(kCorrelationFile), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
}

void analyze_ppl_curve(const RunConfig& config) {
  auto vec_path = config.out(vectors_filename(config.axis));
  if (!std::filesystem::exists(vec_path)) {
    throw Error(Errc::missing_artifact,
                vec_path.string() + " not found; run 'culturesteer steer' first");
  }
  SteeringVectorSet vectors = load_vectors(vec_path);
  SearchSummary search = read_search_summary(config, "steer");
  ModelHandle model = config.load();
  std::vector<Scenario> dataset = load_config_dataset(config);
  DatasetSplit parts = split(dataset, config.global_seed, config.split_ratio);
  std::vector<LabeledScenario> eval_labeled =
      assign_labels(parts.evaluation, config.global_seed);

  // Prompts: the first configured number of evaluation probe bodies, in
  // split order.
  std::vector<std::string> prompts;
  for (const auto& l : eval_labeled) {
    if (static_cast<int>(prompts.size()) >= config.ppl_prompts) break;
    prompts.push_back(render_body(l));
  }
  auto curve = perplexity_curve(
      model, vectors, search.selected, config.ppl_alphas, prompts,
      config.ppl_window, config.temperature, config.global_seed,
      config.ppl_score_with_baseline, config.jobs);
  std::string csv = "alpha,mean_ppl\n";
  for (const auto& [alpha, ppl] : curve) {
    csv += fmt_double(alpha) + "," + fmt_double(ppl) + "\n";
  }
  write_text_file(config.out(kPplCurveFile), csv);
  std::cout << csv;
}

void analyze_plot(const RunConfig& config) {
  auto coord_path = config.out(kCoordinateFile);
  auto base_path = config.out(kBaselineCoordFile);
  auto steered_path = config.out(kSteeredCoordFile);
  if (!std::filesystem::exists(coord_path) &&
      !std::filesystem::exists(base_path)) {
    throw Error(Errc::missing_artifact,
                coord_path.string() +
                    " not found; run 'culturesteer probe' or 'steer' first");
  }
  HumanAnchors anchors;
  if (config.anchors_path && std::filesystem::exists(*config.anchors_path)) {
    anchors = load_anchors(*config.anchors_path);
  }
  std::vector<CulturalCoordinate> coords;
  if (std::filesystem::exists(coord_path)) {
    coords.push_back(
        CulturalCoordinate::from_json(read_text_file(coord_path)));
  }
  std::vector<std::pair<CulturalCoordinate, CulturalCoordinate>> arrows;
  if (std::filesystem::exists(base_path) &&
      std::filesystem::exists(steered_path)) {
    arrows.emplace_back(
        CulturalCoordinate::from_json(read_text_file(base_path)),
        CulturalCoordinate::from_json(read_text_file(steered_path)));
  }
  write_text_file(config.out(kMapSvgFile),
                  svg_culture_map(anchors, coords, arrows));
  std::cout << "wrote " << config.out(kMapSvgFile).string() << "\n";

  auto curve_path = config.out(kPplCurveFile);
  if (std::filesystem::exists(curve_path)) {
    std::vector<std::pair<double, double>> points;
    std::istringstream in(read_text_file(curve_path));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw Error(Errc::parse_error, curve_path.string() + ": bad row");
      }
      points.emplace_back(parse_double(line.substr(0, comma)),
                          parse_double(line.substr(comma + 1)));
    }
    write_text_file(
        config.out(kPplSvgFile),
        svg_line_chart("Perplexity vs. steering strength", "alpha",
                       "mean perplexity", points));
    std::cout << "wrote " << config.out(kPplSvgFile).string() << "\n";
  }
}

}  // namespace

void cmd_analyze(const RunConfig& config, const std::string& subcommand) {
  ensure_out_dir(config);
  if (subcommand == "entangle") {
    analyze_entangle(config);
  } else if (subcommand == "distance") {
    analyze_distance(config);
  } else if (subcommand == "heatmap") {
    analyze_heatmap(config);
  } else if (subcommand == "correlation") {
    analyze_correlation(config);
  } else if (subcommand == "ppl-curve") {
    analyze_ppl_curve(config);
  } else if (subcommand == "plot") {
    analyze_plot(config);
  } else {
    throw Error(Errc::bad_argument,
                "unknown analyze subcommand '" + subcommand + "'");
  }
}

}  // namespace culturesteer
