// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/probing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace culturesteer {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

WvsRangeConfig WvsRangeConfig::defaults() {
  WvsRangeConfig c;
  // 10-point justifiability/importance items; high_pole_at_max reflects the
  // source coding direction (F063 counts up toward "very important", the
  // Traditional pole, so the Secular-Rational pole sits at the minimum).
  c.ranges["Y01"] = {1, 10, false};
  c.ranges["Y03"] = {1, 10, true};
  c.ranges["X03"] = {1, 10, true};
  // 4-point items; A008 and G006 count up toward the negative pole.
  c.ranges["X02"] = {1, 4, false};
  c.ranges["Y04"] = {1, 4, true};
  c.ranges["Y05"] = {1, 4, true};
  // Binary-coded recodes.
  c.ranges["X01"] = {0, 1, true};
  c.ranges["X04"] = {0, 1, true};
  c.ranges["X05"] = {0, 1, true};
  c.ranges["Y02"] = {0, 1, true};
  return c;
}

std::string render_body(const LabeledScenario& labeled) {
  const Scenario& s = labeled.scenario;
  const std::string& a = labeled.key == LabelKey::high_is_a ? s.option_high
                                                            : s.option_low;
  const std::string& b = labeled.key == LabelKey::high_is_a ? s.option_low
                                                            : s.option_high;
  return s.scenario_text + "\nOption A: " + a + "\nOption B: " + b +
         "\nWhat will you do (A/B)?";
}

std::string render_prompt(const LabeledScenario& labeled,
                          const PersonaProfile* persona) {
  std::string body = render_body(labeled);
  if (persona == nullptr || persona->kind == PersonaKind::none) return body;
  return persona->text + "\n\n" + body;
}

double compute_p(double logit_a, double logit_b, LabelKey key) {
  if (!std::isfinite(logit_a) || !std::isfinite(logit_b)) {
    throw Error(Errc::bad_argument, "non-finite logit");
  }
  double z_pos = key == LabelKey::high_is_a ? logit_a : logit_b;
  double z_neg = key == LabelKey::high_is_a ? logit_b : logit_a;
  double m = std::max(z_pos, z_neg);
  double ep = std::exp(z_pos - m);
  double en = std::exp(z_neg - m);
  return ep / (ep + en);
}

TinyModelScorer::TinyModelScorer(const ModelHandle& model,
                                 InterventionSpec interventions)
    : session_(model) {
  session_.set_interventions(std::move(interventions));
}

std::pair<double, double> TinyModelScorer::option_logits(
    const std::string& body, const std::optional<std::string>& system_text) {
  std::string prompt = system_text ? *system_text + "\n\n" + body : body;
  std::vector<Token> tokens = encode(prompt);
  std::vector<float> logits = session_.forward_last_logits(tokens);
  const Token a = encode("A")[0];
  const Token b = encode("B")[0];
  return {static_cast<double>(logits[static_cast<std::size_t>(a)]),
          static_cast<double>(logits[static_cast<std::size_t>(b)])};
}

ProbeResult probe(OptionScorer& scorer, const LabeledScenario& labeled,
                  const PersonaProfile* persona) {
  ProbeResult r;
  r.scenario_id = labeled.scenario.id;
  r.key = labeled.key;
  std::optional<std::string> system_text;
  if (persona != nullptr && persona->kind != PersonaKind::none) {
    system_text = persona->text;
    r.persona_kind = persona->kind;
    r.country = persona->country;
  }
  r.prompt = render_prompt(labeled, persona);
  auto [la, lb] = scorer.option_logits(render_body(labeled), system_text);
  r.logit_a = la;
  r.logit_b = lb;
  r.p_high = compute_p(la, lb, labeled.key);
  return r;
}

std::vector<QuestionScore> aggregate(const std::vector<ProbeResult>& results,
                                     const std::vector<Scenario>& dataset,
                                     GroupBy group_by) {
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : dataset) by_id[s.id] = &s;

  std::vector<const ProbeResult*> ordered;
  ordered.reserve(results.size());
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const ProbeResult* a, const ProbeResult* b) {
              return a->scenario_id < b->scenario_id;
            });

  // key -> (sum, n); map iteration yields deterministic group order.
  std::map<std::pair<std::string, int>, std::pair<double, int>> groups;
  for (const ProbeResult* r : ordered) {
    auto it = by_id.find(r->scenario_id);
    if (it == by_id.end()) {
      throw Error(Errc::dangling_scenario,
                  "result references unknown scenario '" + r->scenario_id + "'");
    }
    const Scenario& s = *it->second;
    int domain_key =
        group_by == GroupBy::qid ? -1 : static_cast<int>(s.domain);
    auto& acc = groups[{s.qid, domain_key}];
    acc.first += r->p_high;
    acc.second += 1;
  }

  std::vector<QuestionScore> out;
  for (const auto& [key, acc] : groups) {
    QuestionScore q;
    q.qid = key.first;
    if (key.second >= 0) q.domain = static_cast<Domain>(key.second);
    q.n = acc.second;
    q.mean_p = acc.first / static_cast<double>(acc.second);
    out.push_back(std::move(q));
  }
  return out;
}

QuestionScore rescale(const QuestionScore& score, const WvsRangeConfig& config) {
  auto it = config.ranges.find(score.qid);
  if (it == config.ranges.end()) {
    throw Error(Errc::missing_range, "no WVS range for qid " + score.qid);
  }
  const WvsRange& r = it->second;
  if (!(r.min < r.max)) {
    throw Error(Errc::bad_config, "range min must be < max for " + score.qid);
  }
  double t = r.high_pole_at_max ? score.mean_p : 1.0 - score.mean_p;
  QuestionScore out = score;
  out.rescaled = r.min + t * (r.max - r.min);
  return out;
}

std::string probe_result_to_json(const ProbeResult& r) {
  ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["key"] = label_key_name(r.key);
  j["logit_a"] = r.logit_a;
  j["logit_b"] = r.logit_b;
  j["p_high"] = r.p_high;
  j["persona"] = persona_kind_name(r.persona_kind);
  if (r.country) {
    j["country"] = *r.country;
  } else {
    j["country"] = nullptr;
  }
  j["prompt"] = r.prompt;
  return j.dump();
}

ProbeResult probe_result_from_json(const std::string& line) {
  ProbeResult r;
  try {
    json j = json::parse(line);
    r.scenario_id = j.at("scenario_id").get<std::string>();
    std::string key = j.at("key").get<std::string>();
    if (key == "HighIsA") {
      r.key = LabelKey::high_is_a;
    } else if (key == "HighIsB") {
      r.key = LabelKey::high_is_b;
    } else {
      throw Error(Errc::parse_error, "bad label key '" + key + "'");
    }
    r.logit_a = j.at("logit_a").get<double>();
    r.logit_b = j.at("logit_b").get<double>();
    r.p_high = j.at("p_high").get<double>();
    r.persona_kind = parse_persona_kind(j.at("persona").get<std::string>());
    if (j.contains("country") && !j.at("country").is_null()) {
      r.country = j.at("country").get<std::string>();
    }
    r.prompt = j.value("prompt", "");
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  return r;
}

void write_probe_jsonl(const std::filesystem::path& path,
                       const std::vector<ProbeResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  for (const auto& r : results) out << probe_result_to_json(r) << "\n";
}

std::vector<ProbeResult> read_probe_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<ProbeResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(probe_result_from_json(line));
  }
  return out;
}

std::string scores_to_csv(const std::vector<QuestionScore>& scores) {
  std::string csv = "qid,domain,n,mean_p,rescaled\n";
  for (const auto& s : scores) {
    csv += s.qid;
    csv += ',';
    csv += s.domain ? domain_name(*s.domain) : "";
    csv += ',';
    csv += std::to_string(s.n);
    csv += ',';
    csv += fmt_double(s.mean_p);
    csv += ',';
    csv += s.rescaled ? fmt_double(*s.rescaled) : "";
    csv += '\n';
  }
  return csv;
}

}  // namespace culturesteer
