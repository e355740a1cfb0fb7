// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "culturesteer/pipeline.hpp"

namespace py = pybind11;
namespace cs = culturesteer;

namespace {

cs::RunConfig config_from_json(const std::string& text) {
  cs::RunConfig c;
  if (!text.empty()) c.apply_json_text(text);
  return c;
}

// In-process model with the operations the pipeline composes: scoring,
// generation, self-scored perplexity, and probe prompts.
class Model {
 public:
  explicit Model(const std::string& config_json,
                 const std::string& weights_path) {
    cs::RunConfig c = config_from_json(config_json);
    if (!weights_path.empty()) c.weights_path = weights_path;
    handle_ = std::make_unique<cs::ModelHandle>(c.load());
  }

  // Sampled byte tokens need not decode as UTF-8, so the result is bytes.
  py::bytes generate(const std::string& prompt, int max_new,
                     double temperature, std::uint64_t seed) {
    cs::Session session(*handle_);
    return py::bytes(cs::decode(
        session.generate(cs::encode(prompt), max_new, temperature, seed)));
  }

  double perplexity(const std::string& prompt, int window, double temperature,
                    std::uint64_t seed) {
    cs::Session session(*handle_);
    return session.perplexity(cs::encode(prompt), window, temperature, seed);
  }

  std::vector<double> logits(const std::string& prompt) {
    cs::Session session(*handle_);
    std::vector<float> z = session.forward_last_logits(cs::encode(prompt));
    return std::vector<double>(z.begin(), z.end());
  }

  std::vector<std::pair<std::string, double>> probe_dataset(
      const std::string& dataset_json, std::uint64_t seed) {
    std::vector<cs::Scenario> ds = cs::parse_dataset(dataset_json);
    std::vector<cs::LabeledScenario> labeled = cs::assign_labels(ds, seed);
    cs::TinyModelScorer scorer(*handle_);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(labeled.size());
    for (const auto& l : labeled) {
      cs::ProbeResult r = cs::probe(scorer, l, nullptr);
      out.emplace_back(r.scenario_id, r.p_high);
    }
    return out;
  }

 private:
  std::unique_ptr<cs::ModelHandle> handle_;
};

void run_command(const std::string& config_json, const std::string& command) {
  cs::RunConfig c = config_from_json(config_json);
  if (command == "probe") {
    cs::cmd_probe(c);
  } else if (command == "layer-search") {
    cs::cmd_layer_search(c);
  } else if (command == "steer") {
    cs::cmd_steer(c);
  } else if (command.rfind("analyze:", 0) == 0) {
    cs::cmd_analyze(c, command.substr(8));
  } else {
    throw cs::Error(cs::Errc::bad_argument, "unknown command '" + command + "'");
  }
}

std::string validate_json(const std::string& dataset_json) {
  return cs::validate(cs::parse_dataset(dataset_json)).to_json();
}

std::string persona_text(const std::string& kind, const std::string& country,
                         const std::string& stats_path,
                         const std::string& codebook_path,
                         const std::string& names_path) {
  cs::RunConfig c;
  c.persona_kind = cs::parse_persona_kind(kind);
  c.persona_country = country;
  if (!stats_path.empty()) c.stats_path = stats_path;
  if (!codebook_path.empty()) c.codebook_path = codebook_path;
  if (!names_path.empty()) c.names_path = names_path;
  std::optional<cs::PersonaProfile> p = c.build_persona();
  return p ? p->text : std::string();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "culturesteer core: deterministic cultural-value probing and "
            "activation steering";

  py::register_exception<cs::Error>(m, "CultureSteerError");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const std::string&>(),
           py::arg("config_json") = "", py::arg("weights_path") = "")
      .def("generate", &Model::generate, py::arg("prompt"),
           py::arg("max_new") = 64, py::arg("temperature") = 0.7,
           py::arg("seed") = 0)
      .def("perplexity", &Model::perplexity, py::arg("prompt"),
           py::arg("window") = 128, py::arg("temperature") = 0.7,
           py::arg("seed") = 0)
      .def("logits", &Model::logits, py::arg("prompt"))
      .def("probe_dataset", &Model::probe_dataset, py::arg("dataset_json"),
           py::arg("seed") = 42);

  m.def("hash64",
        [](std::uint64_t seed, const std::string& key) {
          return cs::hash64(seed, key);
        },
        py::arg("seed"), py::arg("key"));
  m.def("synthetic_dataset_json",
        [](int per_cell, std::uint64_t seed) {
          return cs::serialize_dataset(cs::synthetic_dataset(per_cell, seed));
        },
        py::arg("per_cell") = 20, py::arg("seed") = 7);
  m.def("validate_json", &validate_json, py::arg("dataset_json"));
  m.def("emit_generation_prompt",
        [](const std::vector<std::string>& ids,
           const std::vector<std::string>& domains) {
          cs::GenerationConfig gc;
          gc.wvs_ids = ids;
          gc.domains = domains;
          return cs::emit_generation_prompt(gc);
        },
        py::arg("ids") = std::vector<std::string>{},
        py::arg("domains") = std::vector<std::string>{});
  m.def("persona_text", &persona_text, py::arg("kind"), py::arg("country"),
        py::arg("stats_path") = "", py::arg("codebook_path") = "",
        py::arg("names_path") = "");
  m.def("run", &run_command, py::arg("config_json"), py::arg("command"),
        "Run one pipeline stage; artifacts land in the configured out_dir.");
}
