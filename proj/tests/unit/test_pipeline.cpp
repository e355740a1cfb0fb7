// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "culturesteer/pipeline.hpp"
#include "culturesteer/svg.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace culturesteer;
using nlohmann::json;
using testsupport::CliResult;
using testsupport::TempDir;
using testsupport::cli_path;
using testsupport::data_dir;
using testsupport::run_cli;
using testsupport::tiny_config;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::bad_argument;
}

// Pipeline-sized run over the tiny model: 60 scenarios, generous max_seq so
// every rendered body fits.
RunConfig tiny_run(const TempDir& dir, const std::string& out_name) {
  RunConfig c;
  c.model = tiny_config();
  c.model.max_seq = 320;
  c.dataset_path = dir.file("dataset.json").string();
  c.anchors_path = (data_dir() / "anchors.json").string();
  c.out_dir = dir.file(out_name).string();
  c.ppl_window = 12;
  c.ppl_prompts = 2;
  c.ppl_alphas = {0.0, 0.2};
  return c;
}

}  // namespace

TEST_CASE("run configuration files override every default they name") {
  RunConfig c;
  c.apply_json_text(R"({
    "model": {"d_model": 16, "n_layers": 2, "n_heads": 2, "d_ff": 32,
              "max_seq": 128, "init_seed": 9, "vocab_size": 259},
    "weights_path": "w.bin",
    "dataset": "ds.json",
    "global_seed": 7,
    "temperature": 0.5,
    "ppl_window": 64,
    "alpha": 0.1,
    "alpha_cap": 0.6,
    "force": true,
    "top_k": 2,
    "threshold": 0.3,
    "split_ratio": 0.25,
    "axis": "Y",
    "persona": {"kind": "advanced", "country": "India", "stats": "s.json",
                "codebook": "c.json", "names": "n.json"},
    "wvs_ranges": {"Q42": {"min": 2, "max": 6, "high_pole_at_max": false}},
    "projection": {"offset_x": 1, "offset_y": -1, "scale_x": 3, "scale_y": 4},
    "anchors": "a.json",
    "out_dir": "elsewhere",
    "jobs": 3,
    "ppl_alphas": [0, 0.3],
    "ppl_prompts": 9,
    "ppl_score_with_baseline": true
  })");
  CHECK(c.model.d_model == 16);
  CHECK(c.model.n_layers == 2);
  CHECK(c.model.init_seed == 9);
  CHECK(c.weights_path == "w.bin");
  CHECK(c.dataset_path == "ds.json");
  CHECK(c.global_seed == 7);
  CHECK(c.temperature == 0.5);
  CHECK(c.ppl_window == 64);
  CHECK(c.alpha == 0.1);
  CHECK(c.alpha_cap == 0.6);
  CHECK(c.force);
  CHECK(c.top_k == 2);
  CHECK(c.threshold == 0.3);
  CHECK(c.split_ratio == 0.25);
  CHECK(c.axis == Axis::y);
  CHECK(c.persona_kind == PersonaKind::advanced);
  CHECK(c.persona_country == "India");
  CHECK(c.stats_path == "s.json");
  CHECK(c.codebook_path == "c.json");
  CHECK(c.names_path == "n.json");
  CHECK(c.wvs_ranges.ranges.at("Q42").min == 2);
  CHECK_FALSE(c.wvs_ranges.ranges.at("Q42").high_pole_at_max);
  CHECK(c.wvs_ranges.ranges.at("Y01").max == 10);  // defaults survive merging
  CHECK(c.projection.offset_x == 1);
  CHECK(c.projection.scale_y == 4);
  CHECK(c.anchors_path == "a.json");
  CHECK(c.out_dir == "elsewhere");
  CHECK(c.jobs == 3);
  CHECK(c.ppl_alphas == std::vector<double>{0.0, 0.3});
  CHECK(c.ppl_prompts == 9);
  CHECK(c.ppl_score_with_baseline);

  CHECK(code_of([] { RunConfig().apply_json_text("nope"); }) ==
        Errc::parse_error);
  CHECK(code_of([] { RunConfig().apply_json_text(R"({"axis": "Q"})"); }) ==
        Errc::bad_argument);
  CHECK(code_of([] { RunConfig::from_file("no-such-config.json"); }) ==
        Errc::io_error);
}

TEST_CASE("artifact paths join the output directory") {
  RunConfig c;
  c.out_dir = "somewhere";
  CHECK(c.out("x.csv") == std::filesystem::path("somewhere") / "x.csv");
  CHECK(vectors_filename(Axis::x) == "vectors_X.bin");
  CHECK(vectors_filename(Axis::y) == "vectors_Y.bin");
}

TEST_CASE("persona construction follows the configured kind") {
  RunConfig c;
  CHECK_FALSE(c.build_persona().has_value());

  c.persona_kind = PersonaKind::basic;
  c.persona_country = "Denmark";
  auto basic = c.build_persona();
  REQUIRE(basic.has_value());
  CHECK(basic->text ==
        "You are a person born in Denmark and live in Denmark");

  c.persona_kind = PersonaKind::advanced;
  CHECK(code_of([&] { c.build_persona(); }) == Errc::bad_config);
  c.stats_path = (data_dir() / "stats" / "denmark.json").string();
  c.codebook_path = (data_dir() / "codebook.json").string();
  auto advanced = c.build_persona();
  REQUIRE(advanced.has_value());
  CHECK(advanced->kind == PersonaKind::advanced);
  CHECK(advanced->name == "Soren");
}

TEST_CASE("validate returns the dataset's pass/fail state") {
  TempDir dir;
  save_dataset(dir.file("good.json"), synthetic_dataset(20, 7));
  save_dataset(dir.file("small.json"), synthetic_dataset(2, 7));

  RunConfig c;
  c.dataset_path = dir.file("good.json").string();
  std::string report;
  CHECK(cmd_validate(c, &report) == 0);
  CHECK(json::parse(report).at("pass") == true);

  c.dataset_path = dir.file("small.json").string();
  CHECK(cmd_validate(c, &report) == 2);
  CHECK(json::parse(report).at("pass") == false);

  c.dataset_path.clear();
  CHECK(code_of([&] { cmd_validate(c, nullptr); }) == Errc::bad_config);
  c.dataset_path = dir.file("absent.json").string();
  CHECK(code_of([&] { cmd_validate(c, nullptr); }) == Errc::io_error);
}

TEST_CASE("probe refuses an invalid dataset and resumes recorded results") {
  TempDir dir;
  save_dataset(dir.file("small.json"), synthetic_dataset(2, 7));
  RunConfig bad = tiny_run(dir, "out_bad");
  bad.dataset_path = dir.file("small.json").string();
  CHECK(code_of([&] { cmd_probe(bad); }) == Errc::invalid_dataset);

  // A full dataset plus pre-recorded results: the model is never loaded, the
  // downstream artifacts derive from the recorded probabilities alone.
  std::vector<Scenario> dataset = synthetic_dataset(20, 7);
  save_dataset(dir.file("dataset.json"), dataset);
  RunConfig c = tiny_run(dir, "out_resume");
  std::filesystem::create_directories(c.out_dir);
  std::vector<ProbeResult> canned;
  for (const auto& s : dataset) {
    ProbeResult r;
    r.scenario_id = s.id;
    r.p_high = 1.0;
    canned.push_back(r);
  }
  write_probe_jsonl(c.out(kProbeResultsFile), canned);
  cmd_probe(c);

  CulturalCoordinate coord =
      CulturalCoordinate::from_json(read_text_file(c.out(kCoordinateFile)));
  CHECK(coord.x == 2.5);  // every p_high is 1, so both raw means are 1
  CHECK(coord.y == 2.5);
  CHECK(coord.label == "baseline");
  std::string scores = read_text_file(c.out(kScoresFile));
  CHECK(scores.find("X01,,60,1,1") != std::string::npos);
  CHECK(scores.find("Y01,,60,1,1") != std::string::npos);
  std::string by_cell = read_text_file(c.out(kScoresByDomainFile));
  CHECK(by_cell.find("X01,family,20,1,1") != std::string::npos);
}

TEST_CASE("steer writes the full artifact set and reuses stored vectors") {
  TempDir dir;
  save_dataset(dir.file("dataset.json"), synthetic_dataset(2, 9));
  RunConfig c = tiny_run(dir, "out");
  cmd_layer_search(c);
  for (const char* name : {kLayerSearchJson, kLayerSearchCsv}) {
    CHECK(std::filesystem::exists(c.out(name)));
  }
  json search = json::parse(read_text_file(c.out(kLayerSearchJson)));
  CHECK(search.at("selected").size() == 4);  // top_k 4 of 4 layers
  CHECK(search.at("alpha") == 0.2);

  cmd_steer(c);
  for (const char* name :
       {kSteeredResultsFile, kBaselineCoordFile, kSteeredCoordFile,
        kEntanglementFile}) {
    CHECK(std::filesystem::exists(c.out(name)));
  }
  CHECK(std::filesystem::exists(c.out(vectors_filename(Axis::x))));
  json ent = json::parse(read_text_file(c.out(kEntanglementFile)));
  CHECK(ent.at("target_axis") == "X");
  CHECK(ent.at("e").get<double>() >= 0.0);

  // The stored vector file is authoritative on rerun: plant a marker in it
  // and confirm a second steer leaves the file alone.
  auto vec_path = c.out(vectors_filename(Axis::x));
  SteeringVectorSet planted = load_vectors(vec_path);
  planted.n = 999;
  save_vectors(vec_path, planted);
  // The search report, in contrast, is recomputed every time.
  write_text_file(c.out(kLayerSearchJson), "garbage");
  cmd_steer(c);
  CHECK(load_vectors(vec_path).n == 999);
  CHECK(json::parse(read_text_file(c.out(kLayerSearchJson)))
            .contains("selected"));

  // Post-hoc analyses over the recorded artifacts.
  CulturalCoordinate probe_coord;
  probe_coord.x = 0.4;
  probe_coord.y = -0.2;
  probe_coord.label = "probe";
  write_text_file(c.out(kCoordinateFile), probe_coord.to_json() + "\n");

  cmd_analyze(c, "entangle");
  cmd_analyze(c, "distance");
  std::string distances = read_text_file(c.out(kDistancesFile));
  CHECK(distances.rfind("country,anchor_x,anchor_y,model_x,model_y,distance\n",
                        0) == 0);
  CHECK(distances.find("Denmark,") != std::string::npos);

  cmd_analyze(c, "correlation");
  json corr = json::parse(read_text_file(c.out(kCorrelationFile)));
  CHECK(corr.at("n") == 59);

  cmd_analyze(c, "ppl-curve");
  std::string curve = read_text_file(c.out(kPplCurveFile));
  CHECK(curve.rfind("alpha,mean_ppl\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);

  cmd_analyze(c, "heatmap");
  json heat = json::parse(read_text_file(c.out(kHeatmapJson)));
  CHECK(heat.at("cells").size() == 9);
  CHECK(heat.at("axis_steered") == "X");

  cmd_analyze(c, "plot");
  std::string map_svg = read_text_file(c.out(kMapSvgFile));
  CHECK(map_svg.rfind("<svg", 0) == 0);
  CHECK(map_svg.find("</svg>") != std::string::npos);
  CHECK(map_svg.find(">Denmark</text>") != std::string::npos);
  std::string ppl_svg = read_text_file(c.out(kPplSvgFile));
  CHECK(ppl_svg.find("Perplexity vs. steering strength") != std::string::npos);
}

TEST_CASE("analyses demand their producer artifacts") {
  TempDir dir;
  save_dataset(dir.file("dataset.json"), synthetic_dataset(2, 9));
  RunConfig c = tiny_run(dir, "empty_out");
  for (const char* sub : {"entangle", "distance", "ppl-curve", "heatmap",
                          "plot"}) {
    CHECK(code_of([&] { cmd_analyze(c, sub); }) == Errc::missing_artifact);
  }
  CHECK(code_of([&] { cmd_analyze(c, "nonesuch"); }) == Errc::bad_argument);
  c.anchors_path.reset();
  CHECK(code_of([&] { cmd_analyze(c, "correlation"); }) == Errc::bad_config);
}

TEST_CASE("svg emission escapes markup in labels") {
  HumanAnchors anchors;
  anchors.coords["A&B <Land>"] = {0.0, 0.0};
  std::string svg = svg_culture_map(anchors, {}, {});
  CHECK(svg.find("A&amp;B &lt;Land&gt;") != std::string::npos);
  CHECK(svg.find("A&B") == std::string::npos);
  CHECK_THROWS_AS(svg_line_chart("t", "x", "y", {}), Error);
}

TEST_CASE("text file helpers round-trip and report io failures") {
  TempDir dir;
  write_text_file(dir.file("t.txt"), "line\n");
  CHECK(read_text_file(dir.file("t.txt")) == "line\n");
  CHECK(code_of([&] { read_text_file(dir.file("absent.txt")); }) ==
        Errc::io_error);
  CHECK(code_of([&] {
          write_text_file(dir.file("no-dir") / "t.txt", "x");
        }) == Errc::io_error);
}

TEST_CASE("cli: version, parse failures, and validation exit codes") {
  CliResult version = run_cli({"--version"});
  CHECK(version.exit_code == 0);
  CHECK(version.out.find("culturesteer 0.1.0") != std::string::npos);

  CHECK(run_cli({}).exit_code == 1);
  CHECK(run_cli({"no-such-command"}).exit_code == 1);

  TempDir dir;
  save_dataset(dir.file("good.json"), synthetic_dataset(20, 7));
  save_dataset(dir.file("small.json"), synthetic_dataset(2, 7));

  CliResult good =
      run_cli({"validate", "--dataset", dir.file("good.json").string()});
  CHECK(good.exit_code == 0);
  CHECK(good.out.find("\"pass\": true") != std::string::npos);

  CliResult small =
      run_cli({"validate", "--dataset", dir.file("small.json").string()});
  CHECK(small.exit_code == 2);
  CHECK(small.out.find("\"pass\": false") != std::string::npos);

  CliResult absent =
      run_cli({"validate", "--dataset", dir.file("absent.json").string()});
  CHECK(absent.exit_code == 3);
  CHECK(absent.out.find("[IoError]") != std::string::npos);

  CliResult bad_probe =
      run_cli({"probe", "--dataset", dir.file("small.json").string(),
               "--out-dir", dir.file("out").string()});
  CHECK(bad_probe.exit_code == 2);
  CHECK(bad_probe.out.find("[InvalidDataset]") != std::string::npos);
}

TEST_CASE("cli: the alpha cap stops an over-strength steer run") {
  TempDir dir;
  save_dataset(dir.file("dataset.json"), synthetic_dataset(2, 9));
  std::ofstream(dir.file("config.json"))
      << R"({"model": {"d_model": 16, "n_heads": 2, "d_ff": 32, "max_seq": 320}})";
  CliResult res = run_cli({"steer", "--config", dir.file("config.json").string(),
                           "--dataset", dir.file("dataset.json").string(),
                           "--out-dir", dir.file("out").string(), "--alpha",
                           "0.5"});
  CHECK(res.exit_code == 1);
  CHECK(res.out.find("[AlphaOverCap]") != std::string::npos);
}

TEST_CASE("cli: generation prompt emission matches the library byte for byte") {
  CliResult all = run_cli({"emit-gen-prompt"});
  CHECK(all.exit_code == 0);
  CHECK(all.out == emit_generation_prompt(GenerationConfig{}));

  CliResult unknown = run_cli({"emit-gen-prompt", "--ids", "V999"});
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.out.find("[UnknownWvsId]") != std::string::npos);
}

TEST_CASE("cli: persona and sample-dataset emit library output") {
  CliResult basic = run_cli({"persona", "--country", "Denmark"});
  CHECK(basic.exit_code == 0);
  CHECK(basic.out ==
        "You are a person born in Denmark and live in Denmark\n");

  CliResult tagged =
      run_cli({"persona", "--json", "--country", "India"});
  CHECK(tagged.exit_code == 0);
  CHECK(tagged.out.rfind("{\"country\":\"India\",\"kind\":\"basic\"}\n", 0) ==
        0);

  CliResult sample = run_cli(
      {"sample-dataset", "--per-cell", "1", "--seed", "3", "--output", "-"});
  CHECK(sample.exit_code == 0);
  CHECK(sample.out == serialize_dataset(synthetic_dataset(1, 3)) + "\n");
}

TEST_CASE("cli: backend-serve speaks the protocol on stdio") {
  CliResult res = run_cli({"backend-serve"},
                          "{\"op\":\"hello\"}\n{\"op\":\"shutdown\"}\n");
  CHECK(res.exit_code == 0);
  CHECK(res.out.find("\"protocol\":1") != std::string::npos);
  CHECK(res.out.find("\"bye\":true") != std::string::npos);
}

TEST_CASE("cli: CULTURESTEER_OUT_DIR steers artifacts, flags beat it") {
  TempDir dir;
  auto shell = [&](const std::string& env_dir,
                   const std::vector<std::string>& extra) {
    std::string cmd = "CULTURESTEER_OUT_DIR='" + env_dir + "' '" +
                      cli_path().string() + "' analyze correlation --anchors '" +
                      (data_dir() / "anchors.json").string() + "'";
    for (const auto& a : extra) cmd += " '" + a + "'";
    cmd += " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    CHECK(WEXITSTATUS(rc) == 0);
  };

  shell(dir.file("env_out").string(), {});
  CHECK(std::filesystem::exists(dir.file("env_out") / kCorrelationFile));

  shell(dir.file("env_ignored").string(),
        {"--out-dir", dir.file("flag_out").string()});
  CHECK(std::filesystem::exists(dir.file("flag_out") / kCorrelationFile));
  CHECK_FALSE(
      std::filesystem::exists(dir.file("env_ignored") / kCorrelationFile));
}
