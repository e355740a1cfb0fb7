// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "culturesteer/backend.hpp"
#include "culturesteer/pipeline.hpp"

namespace cs = culturesteer;

namespace {

// Flag values, kept apart from RunConfig so precedence stays explicit:
// flags > CULTURESTEER_OUT_DIR > config file > defaults.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> dataset;
  std::optional<std::string> weights;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> axis;
  std::optional<double> alpha;
  std::optional<double> alpha_cap;
  bool force = false;
  std::optional<int> top_k;
  std::optional<double> threshold;
  std::optional<double> split_ratio;
  std::optional<std::string> persona_kind;
  std::optional<std::string> country;
  std::optional<std::string> stats;
  std::optional<std::string> codebook;
  std::optional<std::string> names;
  std::optional<std::string> anchors;
  std::optional<double> temperature;
  std::optional<int> ppl_window;
  std::vector<double> ppl_alphas;
  std::optional<int> ppl_prompts;
  bool ppl_baseline_score = false;
};

// Error::what() already starts with "<Class>: "; print the class once.
void report_error(const cs::Error& e) {
  std::string_view msg = e.what();
  std::string_view tag = cs::errc_name(e.code());
  if (msg.size() > tag.size() + 2 && msg.substr(0, tag.size()) == tag &&
      msg.substr(tag.size(), 2) == ": ") {
    msg.remove_prefix(tag.size() + 2);
  }
  std::cerr << "error [" << tag << "]: " << msg << "\n";
}

cs::RunConfig make_config(const Overrides& o) {
  cs::RunConfig c;
  if (o.config_path) c = cs::RunConfig::from_file(*o.config_path);
  if (const char* env = std::getenv("CULTURESTEER_OUT_DIR")) c.out_dir = env;
  if (o.dataset) c.dataset_path = *o.dataset;
  if (o.weights) c.weights_path = *o.weights;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.seed) c.global_seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.axis) c.axis = cs::parse_axis(*o.axis);
  if (o.alpha) c.alpha = *o.alpha;
  if (o.alpha_cap) c.alpha_cap = *o.alpha_cap;
  if (o.force) c.force = true;
  if (o.top_k) c.top_k = *o.top_k;
  if (o.threshold) c.threshold = *o.threshold;
  if (o.split_ratio) c.split_ratio = *o.split_ratio;
  if (o.persona_kind) c.persona_kind = cs::parse_persona_kind(*o.persona_kind);
  if (o.country) c.persona_country = *o.country;
  if (o.stats) c.stats_path = *o.stats;
  if (o.codebook) c.codebook_path = *o.codebook;
  if (o.names) c.names_path = *o.names;
  if (o.anchors) c.anchors_path = *o.anchors;
  if (o.temperature) c.temperature = *o.temperature;
  if (o.ppl_window) c.ppl_window = *o.ppl_window;
  if (!o.ppl_alphas.empty()) c.ppl_alphas = o.ppl_alphas;
  if (o.ppl_prompts) c.ppl_prompts = *o.ppl_prompts;
  if (o.ppl_baseline_score) c.ppl_score_with_baseline = true;
  return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration file");
  cmd->add_option("--dataset", o.dataset, "scenario dataset (JSON array)");
  cmd->add_option("--weights", o.weights, "model weights tensor file");
  cmd->add_option("--out-dir", o.out_dir,
                  "artifact directory (overrides CULTURESTEER_OUT_DIR)");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--jobs", o.jobs, "worker threads");
}

void add_persona_opts(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--persona", o.persona_kind, "none | basic | advanced");
  cmd->add_option("--country", o.country, "persona country");
  cmd->add_option("--stats", o.stats, "country statistics JSON");
  cmd->add_option("--codebook", o.codebook, "answer-category codebook JSON");
  cmd->add_option("--names", o.names, "country -> given-name JSON");
}

void add_steer_opts(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--axis", o.axis, "steered axis: X or Y");
  cmd->add_option("--alpha", o.alpha, "steering strength");
  cmd->add_option("--alpha-cap", o.alpha_cap, "refuse |alpha| above this");
  cmd->add_flag("--force", o.force, "override the alpha cap");
  cmd->add_option("--top-k", o.top_k, "layers to select");
  cmd->add_option("--threshold", o.threshold,
                  "differential magnitude that counts as responsive");
  cmd->add_option("--split-ratio", o.split_ratio,
                  "optimization share of each (question, domain) cell");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "culturesteer: probe, steer, and map cultural value expression in a "
      "deterministic reference transformer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "culturesteer 0.1.0");

  Overrides o;
  std::function<int()> action;

  CLI::App* validate = app.add_subcommand(
      "validate", "check dataset coverage and shape");
  add_common(validate, o);
  validate->callback([&] {
    action = [&]() -> int {
      std::string report;
      int rc = cs::cmd_validate(make_config(o), &report);
      std::cout << report << "\n";
      return rc;
    };
  });

  CLI::App* probe = app.add_subcommand(
      "probe", "score every scenario and project a cultural coordinate");
  add_common(probe, o);
  add_persona_opts(probe, o);
  probe->callback([&] {
    action = [&]() -> int {
      cs::cmd_probe(make_config(o));
      return 0;
    };
  });

  CLI::App* layer_search = app.add_subcommand(
      "layer-search", "rank layers by steering responsiveness");
  add_common(layer_search, o);
  add_steer_opts(layer_search, o);
  layer_search->callback([&] {
    action = [&]() -> int {
      cs::cmd_layer_search(make_config(o));
      return 0;
    };
  });

  CLI::App* steer = app.add_subcommand(
      "steer", "extract vectors, steer the evaluation split, report shift");
  add_common(steer, o);
  add_steer_opts(steer, o);
  add_persona_opts(steer, o);
  steer->callback([&] {
    action = [&]() -> int {
      cs::cmd_steer(make_config(o));
      return 0;
    };
  });

  CLI::App* analyze = app.add_subcommand(
      "analyze", "post-hoc analyses over recorded artifacts");
  analyze->require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> analyses = {
      {"entangle", "off-axis leakage ratio of the recorded steering run"},
      {"distance", "distance from the probed coordinate to each country"},
      {"heatmap", "3x3 cross-domain steering transfer matrix"},
      {"correlation", "correlation between the two axes across countries"},
      {"ppl-curve", "generation perplexity as steering strength grows"},
      {"plot", "SVG renderings of the recorded artifacts"},
  };
  for (const auto& [name, help] : analyses) {
    CLI::App* sub = analyze->add_subcommand(name, help);
    add_common(sub, o);
    add_steer_opts(sub, o);
    sub->add_option("--anchors", o.anchors, "country coordinate JSON");
    sub->add_option("--temperature", o.temperature, "sampling temperature");
    sub->add_option("--ppl-window", o.ppl_window, "max generated tokens");
    sub->add_option("--ppl-alphas", o.ppl_alphas, "alphas for the curve");
    sub->add_option("--ppl-prompts", o.ppl_prompts, "prompts per alpha");
    sub->add_flag("--ppl-baseline-score", o.ppl_baseline_score,
                  "score continuations under the unsteered model");
    std::string sub_name = name;
    sub->callback([&, sub_name] {
      action = [&, sub_name]() -> int {
        cs::cmd_analyze(make_config(o), sub_name);
        return 0;
      };
    });
  }

  CLI::App* emit = app.add_subcommand(
      "emit-gen-prompt", "print the scenario-authoring prompt for a teacher model");
  std::vector<std::string> gen_ids;
  std::vector<std::string> gen_domains;
  emit->add_option("--ids", gen_ids, "survey item ids (default: all ten)");
  emit->add_option("--domains", gen_domains,
                   "scenario domains (default: workplace, family, legal)");
  emit->callback([&] {
    action = [&]() -> int {
      cs::GenerationConfig gc;
      gc.wvs_ids = gen_ids;
      gc.domains = gen_domains;
      std::cout << cs::emit_generation_prompt(gc);
      return 0;
    };
  });

  CLI::App* persona = app.add_subcommand(
      "persona", "print the persona preamble for a country");
  add_persona_opts(persona, o);
  persona->add_option("--config", o.config_path, "JSON run configuration file");
  bool persona_json = false;
  persona->add_flag("--json", persona_json, "emit JSON instead of plain text");
  persona->callback([&] {
    action = [&]() -> int {
      cs::RunConfig c = make_config(o);
      if (c.persona_kind == cs::PersonaKind::none) {
        c.persona_kind = cs::PersonaKind::basic;
      }
      std::optional<cs::PersonaProfile> p = c.build_persona();
      if (!p) return 0;
      if (persona_json) {
        std::cout << "{\"country\":\"" << p->country << "\",\"kind\":\""
                  << cs::persona_kind_name(p->kind) << "\"}\n";
      }
      std::cout << p->text << "\n";
      return 0;
    };
  });

  CLI::App* serve = app.add_subcommand(
      "backend-serve", "serve the line-JSON scoring protocol on stdio");
  add_common(serve, o);
  serve->callback([&] {
    action = [&]() -> int {
      cs::RunConfig c = make_config(o);
      cs::ModelHandle model = c.load();
      cs::serve_backend(std::cin, std::cout, model);
      return 0;
    };
  });

  CLI::App* sample = app.add_subcommand(
      "sample-dataset", "write a deterministic synthetic scenario dataset");
  int per_cell = 20;
  std::uint64_t sample_seed = 7;
  std::string sample_out = "dataset.json";
  sample->add_option("--per-cell", per_cell, "scenarios per (question, domain)");
  sample->add_option("--seed", sample_seed, "generator seed");
  sample->add_option("--output", sample_out, "output path ('-' for stdout)");
  sample->callback([&] {
    action = [&]() -> int {
      std::vector<cs::Scenario> ds = cs::synthetic_dataset(per_cell, sample_seed);
      if (sample_out == "-") {
        std::cout << cs::serialize_dataset(ds) << "\n";
      } else {
        cs::save_dataset(sample_out, ds);
        std::cout << "wrote " << ds.size() << " scenarios to " << sample_out
                  << "\n";
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const cs::Error& e) {
    report_error(e);
    return cs::exit_class(e.code());
  }

  try {
    return action ? action() : 0;
  } catch (const cs::Error& e) {
    report_error(e);
    return cs::exit_class(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
