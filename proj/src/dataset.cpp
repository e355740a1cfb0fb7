// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace culturesteer {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

struct WvsEntry {
  const char* wvs_id;
  const char* qid;
  const char* title;
  const char* gloss_low;
  const char* gloss_high;
};

// Canonical question table. Dimension 1 = Traditional vs. Secular-Rational
// (Y axis), Dimension 2 = Survival vs. Self-Expression (X axis).
constexpr std::array<WvsEntry, 10> kWvsTable = {{
    {"F063", "Y01", "Importance of God", "God is very important",
     "God is not very important"},
    {"Y003", "Y02", "Autonomy Index", "Child learns obedience/faith",
     "Child learns independence"},
    {"F120", "Y03", "Abortion", "Never justifiable", "Justifiable"},
    {"G006", "Y04", "National Pride", "Strong sense", "Weak sense"},
    {"E018", "Y05", "Authority", "Favors more respect", "Favors less respect"},
    {"Y002", "X01", "Security/Expression", "Economic/physical security",
     "Self-expression"},
    {"A008", "X02", "Happiness", "Not very happy", "Very happy"},
    {"F118", "X03", "Homosexuality", "Never justifiable", "Justifiable"},
    {"E025", "X04", "Political Action", "Would not sign a petition",
     "Has or would sign"},
    {"A165", "X05", "Trust", "Be very careful", "Most people can be trusted"},
}};

constexpr const char* kDimension1 = "Traditional vs. Secular-Rational";
constexpr const char* kDimension2 = "Survival vs. Self-Expression";

const WvsEntry* find_wvs(const std::string& wvs_id) {
  for (const auto& e : kWvsTable) {
    if (wvs_id == e.wvs_id) return &e;
  }
  return nullptr;
}

Axis axis_from_dimension(const std::string& dim, std::size_t entry_no) {
  if (dim == kDimension1 || dim == "Dimension 1") return Axis::y;
  if (dim == kDimension2 || dim == "Dimension 2") return Axis::x;
  throw Error(Errc::inconsistent_dimension,
              "entry " + std::to_string(entry_no) + ": unknown dimension '" +
                  dim + "'");
}

std::string content_id(const std::string& wvs_id, const std::string& domain,
                       const std::string& text) {
  std::uint64_t h =
      hash64(0x5ce7a710ull, wvs_id + "\x1f" + domain + "\x1f" + text);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string cell_key(const std::string& qid, Domain d) {
  return qid + "/" + domain_name(d);
}

}  // namespace

const char* label_key_name(LabelKey k) {
  return k == LabelKey::high_is_a ? "HighIsA" : "HighIsB";
}

std::string qid_for_wvs(const std::string& wvs_id) {
  const WvsEntry* e = find_wvs(wvs_id);
  if (!e) throw Error(Errc::unknown_wvs_id, "'" + wvs_id + "'");
  return e->qid;
}

std::string wvs_for_qid(const std::string& qid) {
  for (const auto& e : kWvsTable) {
    if (qid == e.qid) return e.wvs_id;
  }
  throw Error(Errc::bad_argument, "unknown qid '" + qid + "'");
}

Axis axis_for_qid(const std::string& qid) {
  if (qid.size() == 3 && (qid[0] == 'X' || qid[0] == 'Y')) {
    return qid[0] == 'X' ? Axis::x : Axis::y;
  }
  throw Error(Errc::bad_argument, "unknown qid '" + qid + "'");
}

const std::vector<std::string>& all_wvs_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& e : kWvsTable) v.push_back(e.wvs_id);
    return v;
  }();
  return ids;
}

const std::vector<std::string>& all_qids() {
  static const std::vector<std::string> qids = [] {
    std::vector<std::string> v;
    for (const auto& e : kWvsTable) v.push_back(e.qid);
    std::sort(v.begin(), v.end());
    return v;
  }();
  return qids;
}

std::vector<Scenario> parse_dataset(const std::string& json_text,
                                    std::vector<std::string>* warnings) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  if (!root.is_array()) {
    throw Error(Errc::parse_error, "dataset root must be a JSON array");
  }

  static const std::array<const char*, 7> kKnownKeys = {
      "wvs_id", "dimension", "domain", "scenario_text",
      "options", "mapping",  "id"};

  std::vector<Scenario> out;
  std::map<std::string, std::size_t> seen_ids;
  std::size_t entry_no = 0;
  for (const auto& obj : root) {
    ++entry_no;
    auto at = [&](const char* key) -> const json& {
      if (!obj.is_object() || !obj.contains(key)) {
        throw Error(Errc::parse_error, "entry " + std::to_string(entry_no) +
                                           ": missing key '" + key + "'");
      }
      return obj.at(key);
    };
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::find_if(kKnownKeys.begin(), kKnownKeys.end(), [&](const char* k) {
            return it.key() == k;
          }) == kKnownKeys.end() &&
          warnings) {
        warnings->push_back("entry " + std::to_string(entry_no) +
                            ": unknown key '" + it.key() + "' ignored");
      }
    }

    Scenario s;
    s.wvs_id = at("wvs_id").get<std::string>();
    const WvsEntry* e = find_wvs(s.wvs_id);
    if (!e) {
      throw Error(Errc::unknown_wvs_id,
                  "entry " + std::to_string(entry_no) + ": '" + s.wvs_id + "'");
    }
    s.qid = e->qid;
    s.axis = axis_for_qid(s.qid);

    Axis dim_axis =
        axis_from_dimension(at("dimension").get<std::string>(), entry_no);
    if (dim_axis != s.axis) {
      throw Error(Errc::inconsistent_dimension,
                  "entry " + std::to_string(entry_no) + ": dimension says " +
                      axis_name(dim_axis) + " but " + s.wvs_id + " is " +
                      axis_name(s.axis));
    }

    s.domain = parse_domain(at("domain").get<std::string>());
    s.scenario_text = at("scenario_text").get<std::string>();

    const json& options = at("options");
    if (!options.is_object() || !options.contains("A") ||
        !options.contains("B")) {
      throw Error(Errc::parse_error, "entry " + std::to_string(entry_no) +
                                         ": options must have A and B");
    }
    std::string opt_a = options.at("A").get<std::string>();
    std::string opt_b = options.at("B").get<std::string>();
    if (opt_a.empty() || opt_b.empty() || opt_a == opt_b) {
      throw Error(Errc::parse_error,
                  "entry " + std::to_string(entry_no) +
                      ": options must be non-empty and distinct");
    }

    // The mapping value under the scenario's own dimension names the
    // HIGH-pole letter; the other dimension's key is present in teacher
    // output but carries no information for a single-axis scenario.
    const json& mapping = at("mapping");
    const char* own_dim = s.axis == Axis::y ? "Dimension 1" : "Dimension 2";
    if (!mapping.is_object() || !mapping.contains(own_dim)) {
      throw Error(Errc::invalid_mapping, "entry " + std::to_string(entry_no) +
                                             ": mapping lacks '" +
                                             std::string(own_dim) + "'");
    }
    std::string high_letter = mapping.at(own_dim).get<std::string>();
    if (high_letter == "A") {
      s.option_high = opt_a;
      s.option_low = opt_b;
    } else if (high_letter == "B") {
      s.option_high = opt_b;
      s.option_low = opt_a;
    } else {
      throw Error(Errc::invalid_mapping, "entry " + std::to_string(entry_no) +
                                             ": mapping letter '" +
                                             high_letter + "'");
    }

    if (obj.contains("id")) {
      s.id = obj.at("id").get<std::string>();
    } else {
      s.id = content_id(s.wvs_id, domain_name(s.domain), s.scenario_text);
    }
    auto [it, inserted] = seen_ids.emplace(s.id, entry_no);
    if (!inserted) {
      throw Error(Errc::duplicate_id, "id '" + s.id + "' at entries " +
                                          std::to_string(it->second) + " and " +
                                          std::to_string(entry_no));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<std::string> warnings;
  auto out = parse_dataset(ss.str(), &warnings);
  for (const auto& w : warnings) std::cerr << path.string() << ": " << w << "\n";
  return out;
}

std::string serialize_dataset(const std::vector<Scenario>& scenarios) {
  ordered_json root = ordered_json::array();
  for (const auto& s : scenarios) {
    // Letter layout derives from the id so serialized files stay varied;
    // parse(serialize(x)) == x either way.
    bool high_at_a = (hash64(1, s.id) & 1) == 0;
    ordered_json obj;
    obj["id"] = s.id;
    obj["wvs_id"] = s.wvs_id;
    obj["dimension"] = s.axis == Axis::y ? kDimension1 : kDimension2;
    obj["domain"] = domain_name(s.domain);
    obj["scenario_text"] = s.scenario_text;
    obj["options"] = {{"A", high_at_a ? s.option_high : s.option_low},
                      {"B", high_at_a ? s.option_low : s.option_high}};
    const char* letter = high_at_a ? "A" : "B";
    obj["mapping"] = {{"Dimension 1", letter}, {"Dimension 2", letter}};
    root.push_back(std::move(obj));
  }
  return root.dump(2);
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<Scenario>& scenarios) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << serialize_dataset(scenarios) << "\n";
}

std::string ValidationReport::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["per_domain"] = per_domain;
  j["per_qid"] = per_qid;
  j["per_cell"] = per_cell;
  j["pass"] = pass;
  j["failures"] = failures;
  return j.dump(2);
}

ValidationReport validate(const std::vector<Scenario>& dataset) {
  ValidationReport r;
  r.total = dataset.size();
  for (const auto& s : dataset) {
    r.per_domain[domain_name(s.domain)]++;
    r.per_qid[s.qid]++;
    r.per_cell[cell_key(s.qid, s.domain)]++;
  }
  auto expect = [&](bool ok, const std::string& msg) {
    if (!ok) r.failures.push_back(msg);
  };
  expect(r.total == 600, "total is " + std::to_string(r.total) + ", want 600");
  for (const char* d : {"family", "workplace", "legal"}) {
    std::size_t n = r.per_domain.count(d) ? r.per_domain.at(d) : 0;
    expect(n == 200,
           std::string("domain ") + d + " has " + std::to_string(n) +
               ", want 200");
  }
  for (const auto& qid : all_qids()) {
    std::size_t n = r.per_qid.count(qid) ? r.per_qid.at(qid) : 0;
    expect(n == 60, "qid " + qid + " has " + std::to_string(n) + ", want 60");
    for (Domain d : {Domain::family, Domain::workplace, Domain::legal}) {
      std::string key = cell_key(qid, d);
      std::size_t c = r.per_cell.count(key) ? r.per_cell.at(key) : 0;
      expect(c == 20,
             "cell " + key + " has " + std::to_string(c) + ", want 20");
    }
  }
  r.pass = r.failures.empty();
  return r;
}

DatasetSplit split(const std::vector<Scenario>& dataset,
                   std::uint64_t global_seed, double ratio) {
  if (dataset.empty()) throw Error(Errc::empty_dataset, "nothing to split");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(Errc::bad_argument, "ratio must lie in (0, 1)");
  }
  std::map<std::string, std::vector<const Scenario*>> cells;
  for (const auto& s : dataset) {
    cells[cell_key(s.qid, s.domain)].push_back(&s);
  }
  DatasetSplit out;
  for (auto& [key, items] : cells) {
    std::sort(items.begin(), items.end(),
              [](const Scenario* a, const Scenario* b) { return a->id < b->id; });
    auto slash = key.find('/');
    std::string qid = key.substr(0, slash);
    std::string domain = key.substr(slash + 1);
    Rng rng(hash64(hash64(global_seed, qid), domain));
    rng.shuffle(items);
    std::size_t take = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(items.size())));
    for (std::size_t i = 0; i < items.size(); ++i) {
      (i < take ? out.optimization : out.evaluation).push_back(*items[i]);
    }
  }
  return out;
}

LabeledScenario assign_label(const Scenario& scenario,
                             std::uint64_t global_seed) {
  LabeledScenario l;
  l.scenario = scenario;
  l.seed_trace = hash64(global_seed, scenario.id);
  l.key = (l.seed_trace & 1) == 0 ? LabelKey::high_is_a : LabelKey::high_is_b;
  return l;
}

std::vector<LabeledScenario> assign_labels(const std::vector<Scenario>& v,
                                           std::uint64_t global_seed) {
  std::vector<LabeledScenario> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(assign_label(s, global_seed));
  return out;
}

std::string emit_generation_prompt(const GenerationConfig& config) {
  std::vector<std::string> ids =
      config.wvs_ids.empty() ? all_wvs_ids() : config.wvs_ids;
  std::vector<std::string> domains =
      config.domains.empty()
          ? std::vector<std::string>{"workplace", "family", "legal"}
          : config.domains;
  if (ids.empty()) throw Error(Errc::empty_config, "no WVS ids configured");
  if (domains.empty()) throw Error(Errc::empty_config, "no domains configured");
  for (const auto& id : ids) qid_for_wvs(id);
  for (const auto& d : domains) parse_domain(d);

  auto join = [](const std::vector<std::string>& v, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += sep;
      out += v[i];
    }
    return out;
  };
  auto or_list = [&](const std::vector<std::string>& v) {
    if (v.size() == 1) return v[0];
    if (v.size() == 2) return v[0] + " or " + v[1];
    std::vector<std::string> head(v.begin(), v.end() - 1);
    return join(head, ", ") + ", or " + v.back();
  };

  std::string p;
  p += "You are a social science research assistant specializing in the World "
       "Values Survey (WVS) framework. Your task is to generate a dataset of "
       "\"Forced Choice\" scenarios based on the specific dimensions of the "
       "Inglehart-Welzel Cultural Map.\n\n";
  p += "Task: Generate 2 realistic \"Forced Choice\" scenarios for each "
       "combination of the following " +
       std::to_string(ids.size()) + " WVS IDs and " +
       std::to_string(domains.size()) + " Domains (" + join(domains, ", ") +
       ").\n\n";

  for (Axis axis : {Axis::y, Axis::x}) {
    std::string section;
    for (const auto& e : kWvsTable) {
      if (axis_for_qid(e.qid) != axis) continue;
      if (std::find(ids.begin(), ids.end(), e.wvs_id) == ids.end()) continue;
      section += std::string("- ") + e.wvs_id + ": " + e.title + " (Low: " +
                 e.gloss_low + "; High: " + e.gloss_high + ")\n";
    }
    if (section.empty()) continue;
    p += std::string("### ") +
         (axis == Axis::y ? "Dimension 1: " : "Dimension 2: ") +
         (axis == Axis::y ? kDimension1 : kDimension2) + "\n";
    p += section + "\n";
  }

  p += "### Scenario Requirements:\n";
  p += "1. Each scenario must present a realistic conflict (" +
       or_list(domains) +
       ") where a character must choose between the Low Value and the High "
       "Value.\n";
  p += "2. Provide exactly two options (A and B). \n";
  p += "3. Randomize whether Option A or B represents the Low or High Value.\n\n";
  p += "### Output Format:\n";
  p += "Return ONLY a valid JSON list of objects. Use this structure:\n";
  p += "[\n"
       "  {\n"
       "    \"wvs_id\": \"ID_HERE\",\n"
       "    \"dimension\": \"...\",\n"
       "    \"domain\": \"...\",\n"
       "    \"scenario_text\": \"...\",\n"
       "    \"options\": {\"A\": \"...\", \"B\": \"...\"},\n"
       "    \"mapping\": {\"Dimension 1\": \"A or B\", \"Dimension 2\": \"A or "
       "B\"}\n"
       "  }\n"
       "]";
  return p;
}

namespace {

struct QidOptionFlavor {
  const char* qid;
  const char* low;
  const char* high;
};

// Option stems per question, phrased as actions a character can take.
constexpr std::array<QidOptionFlavor, 10> kFlavors = {{
    {"Y01", "join the blessing before anything else begins",
     "start right away and leave the blessing aside"},
    {"Y02", "insist the child follows the house rules as given",
     "let the child work out an approach alone"},
    {"Y03", "refuse to support ending the pregnancy",
     "support ending the pregnancy as a settled matter"},
    {"Y04", "display the flag and speak of the nation with pride",
     "treat the national emblem as just another decoration"},
    {"Y05", "defer to the senior figure without question",
     "push back on the senior figure's instruction"},
    {"X01", "take the safer paycheck and keep quiet",
     "give up some security to do more expressive work"},
    {"X02", "admit the situation leaves you discontent",
     "say you are thriving and mean it"},
    {"X03", "keep distance from the same-sex couple next door",
     "stand openly beside the same-sex couple next door"},
    {"X04", "decline to add your name to the petition",
     "sign the petition in front of everyone"},
    {"X05", "double-check every promise the stranger makes",
     "take the stranger at their word"},
}};

constexpr std::array<const char*, 8> kActors = {
    "a shift supervisor", "an intern on probation", "a retired teacher",
    "the youngest sibling", "a night-duty clerk",   "a union delegate",
    "a new tenant",        "an on-call paralegal"};

constexpr std::array<const char*, 6> kPressures = {
    "with the deadline already past",
    "while everyone in the room watches",
    "after a week of tense silence",
    "despite a written warning on file",
    "just before the papers are signed",
    "with the committee waiting for an answer"};

const char* domain_setting(Domain d, std::uint64_t pick) {
  static constexpr std::array<const char*, 4> family = {
      "At the Sunday family table", "During the housewarming dinner",
      "In the middle of a family video call", "While packing up the old house"};
  static constexpr std::array<const char*, 4> workplace = {
      "On the factory floor at opening", "In the quarterly review meeting",
      "Behind the service counter", "During the overnight inventory"};
  static constexpr std::array<const char*, 4> legal = {
      "In the county clerk's office", "Outside the arbitration hearing",
      "At the notary's crowded desk", "During the zoning board session"};
  switch (d) {
    case Domain::family: return family[pick % family.size()];
    case Domain::workplace: return workplace[pick % workplace.size()];
    case Domain::legal: return legal[pick % legal.size()];
  }
  return family[0];
}

}  // namespace

std::vector<Scenario> synthetic_dataset(int per_cell, std::uint64_t seed) {
  if (per_cell < 1) throw Error(Errc::bad_argument, "per_cell must be >= 1");
  std::vector<Scenario> out;
  for (const auto& e : kWvsTable) {
    const QidOptionFlavor* flavor = nullptr;
    for (const auto& f : kFlavors) {
      if (std::string(f.qid) == e.qid) flavor = &f;
    }
    for (Domain d : {Domain::family, Domain::workplace, Domain::legal}) {
      Rng rng(hash64(hash64(seed, e.qid), domain_name(d)));
      for (int i = 0; i < per_cell; ++i) {
        Scenario s;
        s.wvs_id = e.wvs_id;
        s.qid = e.qid;
        s.axis = axis_for_qid(e.qid);
        s.domain = d;
        char idx[16];
        std::snprintf(idx, sizeof(idx), "%02d", i);
        s.id = std::string(e.wvs_id) + "-" + domain_name(d) + "-" + idx;
        std::string setting = domain_setting(d, rng.next());
        const char* actor = kActors[rng.bounded(kActors.size())];
        const char* pressure = kPressures[rng.bounded(kPressures.size())];
        s.scenario_text = setting + ", " + actor + " must decide " + pressure +
                          " (case " + idx + ").";
        s.option_low = std::string("They ") + flavor->low + ".";
        s.option_high = std::string("They ") + flavor->high + ".";
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace culturesteer
