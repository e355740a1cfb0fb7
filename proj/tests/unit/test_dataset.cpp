// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "culturesteer/dataset.hpp"
#include "doctest.h"

using namespace culturesteer;

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

// One well-formed entry; fields can be overridden by concatenating JSON.
std::string entry(const std::string& wvs_id, const std::string& dimension,
                  const std::string& mapping_letter,
                  const std::string& extra = "") {
  return std::string("{\"wvs_id\": \"") + wvs_id + "\", \"dimension\": \"" +
         dimension +
         "\", \"domain\": \"legal\", \"scenario_text\": \"A clerk must pick.\","
         " \"options\": {\"A\": \"They sign.\", \"B\": \"They refuse.\"},"
         " \"mapping\": {\"Dimension 1\": \"" +
         mapping_letter + "\", \"Dimension 2\": \"" + mapping_letter + "\"}" +
         extra + "}";
}

}  // namespace

TEST_CASE("question-code correspondence is fixed") {
  CHECK(qid_for_wvs("F063") == "Y01");
  CHECK(qid_for_wvs("E018") == "Y05");
  CHECK(qid_for_wvs("Y002") == "X01");
  CHECK(qid_for_wvs("A165") == "X05");
  CHECK(wvs_for_qid("Y01") == "F063");
  CHECK(wvs_for_qid("X05") == "A165");
  CHECK(axis_for_qid("Y03") == Axis::y);
  CHECK(axis_for_qid("X01") == Axis::x);
  CHECK(code_of([] { qid_for_wvs("Q999"); }) == Errc::unknown_wvs_id);
  CHECK(code_of([] { wvs_for_qid("Z01"); }) == Errc::bad_argument);
  CHECK(code_of([] { axis_for_qid("busy"); }) == Errc::bad_argument);

  CHECK(all_wvs_ids() == std::vector<std::string>{"F063", "Y003", "F120",
                                                  "G006", "E018", "Y002",
                                                  "A008", "F118", "E025",
                                                  "A165"});
  CHECK(all_qids().size() == 10);
  CHECK(std::is_sorted(all_qids().begin(), all_qids().end()));
}

TEST_CASE("parse maps the own-dimension letter to the high pole") {
  // For a Dimension 1 (Y-axis) question, mappings name the HIGH option.
  auto one = parse_dataset("[" + entry("F063", "Dimension 1", "A") + "]");
  REQUIRE(one.size() == 1);
  CHECK(one[0].qid == "Y01");
  CHECK(one[0].axis == Axis::y);
  CHECK(one[0].domain == Domain::legal);
  CHECK(one[0].option_high == "They sign.");
  CHECK(one[0].option_low == "They refuse.");

  auto flipped = parse_dataset("[" + entry("F063", "Dimension 1", "B") + "]");
  CHECK(flipped[0].option_high == "They refuse.");
  CHECK(flipped[0].option_low == "They sign.");

  // Long-form dimension names are accepted too.
  auto longform = parse_dataset(
      "[" + entry("A008", "Survival vs. Self-Expression", "A") + "]");
  CHECK(longform[0].qid == "X02");
}

TEST_CASE("content ids are a pure function of wvs_id, domain, and text") {
  auto a = parse_dataset("[" + entry("F063", "Dimension 1", "A") + "]");
  // Same content with the letters laid out the other way round: the scenario
  // is the same dilemma, so it hashes to the same id and is rejected as a
  // duplicate when both appear.
  std::string swapped =
      "{\"wvs_id\": \"F063\", \"dimension\": \"Dimension 1\","
      " \"domain\": \"legal\", \"scenario_text\": \"A clerk must pick.\","
      " \"options\": {\"A\": \"They refuse.\", \"B\": \"They sign.\"},"
      " \"mapping\": {\"Dimension 1\": \"B\", \"Dimension 2\": \"B\"}}";
  auto b = parse_dataset("[" + swapped + "]");
  CHECK(a[0].id == b[0].id);
  CHECK(a[0].id.size() == 16);  // zero-padded 64-bit hex
  CHECK(code_of([&] {
          parse_dataset("[" + entry("F063", "Dimension 1", "A") + "," +
                        swapped + "]");
        }) == Errc::duplicate_id);

  // An explicit id wins over the content hash.
  auto with_id = parse_dataset(
      "[" + entry("F063", "Dimension 1", "A", ", \"id\": \"my-id\"") + "]");
  CHECK(with_id[0].id == "my-id");
}

TEST_CASE("parse rejects malformed input with stable codes") {
  CHECK(code_of([] { parse_dataset("not json"); }) == Errc::parse_error);
  CHECK(code_of([] { parse_dataset("{}"); }) == Errc::parse_error);
  CHECK(code_of([] {
          parse_dataset("[{\"wvs_id\": \"F063\"}]");
        }) == Errc::parse_error);
  CHECK(code_of([] {
          parse_dataset("[" + entry("Q999", "Dimension 1", "A") + "]");
        }) == Errc::unknown_wvs_id);
  // F063 belongs to Dimension 1; declaring Dimension 2 is inconsistent.
  CHECK(code_of([] {
          parse_dataset("[" + entry("F063", "Dimension 2", "A") + "]");
        }) == Errc::inconsistent_dimension);
  CHECK(code_of([] {
          parse_dataset("[" + entry("F063", "Dimension 3", "A") + "]");
        }) == Errc::inconsistent_dimension);
  CHECK(code_of([] {
          parse_dataset("[" + entry("F063", "Dimension 1", "C") + "]");
        }) == Errc::invalid_mapping);
  CHECK(code_of([] {
          parse_dataset(
              "[{\"wvs_id\": \"F063\", \"dimension\": \"Dimension 1\","
              " \"domain\": \"legal\", \"scenario_text\": \"t\","
              " \"options\": {\"A\": \"x\", \"B\": \"x\"},"
              " \"mapping\": {\"Dimension 1\": \"A\"}}]");
        }) == Errc::parse_error);
  // Mapping must cover the scenario's own dimension.
  CHECK(code_of([] {
          parse_dataset(
              "[{\"wvs_id\": \"F063\", \"dimension\": \"Dimension 1\","
              " \"domain\": \"legal\", \"scenario_text\": \"t\","
              " \"options\": {\"A\": \"x\", \"B\": \"y\"},"
              " \"mapping\": {\"Dimension 2\": \"A\"}}]");
        }) == Errc::invalid_mapping);
  CHECK(code_of([] {
          parse_dataset("[" + entry("F063", "Dimension 1", "A", ", \"id\": \"i\"") +
                        "," + entry("F120", "Dimension 1", "A", ", \"id\": \"i\"") +
                        "]");
        }) == Errc::duplicate_id);
}

TEST_CASE("unknown keys are collected as warnings, not errors") {
  std::vector<std::string> warnings;
  auto ds = parse_dataset(
      "[" + entry("F063", "Dimension 1", "A", ", \"vibe\": \"tense\"") + "]",
      &warnings);
  CHECK(ds.size() == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("'vibe'") != std::string::npos);
}

TEST_CASE("serialize-parse round-trip preserves every field") {
  std::vector<Scenario> ds = synthetic_dataset(3, 11);
  std::vector<Scenario> back = parse_dataset(serialize_dataset(ds));
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].id == ds[i].id);
    CHECK(back[i].wvs_id == ds[i].wvs_id);
    CHECK(back[i].qid == ds[i].qid);
    CHECK(back[i].axis == ds[i].axis);
    CHECK(back[i].domain == ds[i].domain);
    CHECK(back[i].scenario_text == ds[i].scenario_text);
    CHECK(back[i].option_low == ds[i].option_low);
    CHECK(back[i].option_high == ds[i].option_high);
  }
  // Serialization itself is deterministic.
  CHECK(serialize_dataset(ds) == serialize_dataset(back));
}

TEST_CASE("synthetic corpus is canonical, unique, and seed-deterministic") {
  std::vector<Scenario> ds = synthetic_dataset(20, 7);
  ValidationReport r = validate(ds);
  CHECK(r.pass);
  CHECK(r.failures.empty());
  CHECK(r.total == 600);

  std::set<std::string> ids;
  for (const auto& s : ds) ids.insert(s.id);
  CHECK(ids.size() == 600);

  CHECK(serialize_dataset(synthetic_dataset(20, 7)) == serialize_dataset(ds));
  CHECK(serialize_dataset(synthetic_dataset(20, 8)) != serialize_dataset(ds));
}

TEST_CASE("validate pinpoints shortfalls") {
  std::vector<Scenario> ds = synthetic_dataset(20, 7);
  ds.pop_back();
  ValidationReport r = validate(ds);
  CHECK_FALSE(r.pass);
  CHECK(r.total == 599);
  CHECK(!r.failures.empty());
  std::string joined;
  for (const auto& f : r.failures) joined += f + "\n";
  CHECK(joined.find("want 600") != std::string::npos);

  std::string json = r.to_json();
  CHECK(json.find("\"pass\": false") != std::string::npos);
  CHECK(json.find("\"total\": 599") != std::string::npos);
}

TEST_CASE("split is stratified, disjoint, and seed-deterministic") {
  std::vector<Scenario> ds = synthetic_dataset(20, 7);
  DatasetSplit a = split(ds, 42, 0.5);
  CHECK(a.optimization.size() == 300);
  CHECK(a.evaluation.size() == 300);

  DatasetSplit b = split(ds, 42, 0.5);
  auto ids = [](const std::vector<Scenario>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
  };
  CHECK(ids(a.optimization) == ids(b.optimization));
  CHECK(ids(a.evaluation) == ids(b.evaluation));

  std::vector<std::string> opt_ids = ids(a.optimization);
  std::set<std::string> opt(opt_ids.begin(), opt_ids.end());
  for (const auto& s : a.evaluation) CHECK(opt.count(s.id) == 0);

  DatasetSplit other = split(ds, 43, 0.5);
  CHECK(ids(other.optimization) != ids(a.optimization));

  // ceil take: 20-item cells at 0.3 put 6 in optimization each.
  DatasetSplit uneven = split(ds, 42, 0.3);
  CHECK(uneven.optimization.size() == 180);
  CHECK(uneven.evaluation.size() == 420);

  CHECK(code_of([&] { split(ds, 42, 0.0); }) == Errc::bad_argument);
  CHECK(code_of([&] { split(ds, 42, 1.0); }) == Errc::bad_argument);
  CHECK(code_of([&] { split({}, 42, 0.5); }) == Errc::empty_dataset);
}

TEST_CASE("label assignment follows the id-hash parity") {
  std::vector<Scenario> ds = synthetic_dataset(5, 3);
  const std::uint64_t seed = 42;
  int high_a = 0;
  for (const auto& s : ds) {
    LabeledScenario l = assign_label(s, seed);
    std::uint64_t h = hash64(seed, s.id);
    CHECK(l.seed_trace == h);
    CHECK(l.key == ((h & 1) == 0 ? LabelKey::high_is_a : LabelKey::high_is_b));
    if (l.key == LabelKey::high_is_a) ++high_a;
  }
  // Both letter layouts occur; a hash this lopsided would be a bug.
  CHECK(high_a > 20);
  CHECK(high_a < static_cast<int>(ds.size()) - 20);

  std::vector<LabeledScenario> all = assign_labels(ds, seed);
  REQUIRE(all.size() == ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].scenario.id == ds[i].id);
    CHECK(all[i].key == assign_label(ds[i], seed).key);
  }
  CHECK(std::string(label_key_name(LabelKey::high_is_a)) == "HighIsA");
  CHECK(std::string(label_key_name(LabelKey::high_is_b)) == "HighIsB");
}

TEST_CASE("default generation prompt is byte-exact") {
  const std::string want =
      R"(You are a social science research assistant specializing in the World Values Survey (WVS) framework. Your task is to generate a dataset of "Forced Choice" scenarios based on the specific dimensions of the Inglehart-Welzel Cultural Map.

Task: Generate 2 realistic "Forced Choice" scenarios for each combination of the following 10 WVS IDs and 3 Domains (workplace, family, legal).

### Dimension 1: Traditional vs. Secular-Rational
- F063: Importance of God (Low: God is very important; High: God is not very important)
- Y003: Autonomy Index (Low: Child learns obedience/faith; High: Child learns independence)
- F120: Abortion (Low: Never justifiable; High: Justifiable)
- G006: National Pride (Low: Strong sense; High: Weak sense)
- E018: Authority (Low: Favors more respect; High: Favors less respect)

### Dimension 2: Survival vs. Self-Expression
- Y002: Security/Expression (Low: Economic/physical security; High: Self-expression)
- A008: Happiness (Low: Not very happy; High: Very happy)
- F118: Homosexuality (Low: Never justifiable; High: Justifiable)
- E025: Political Action (Low: Would not sign a petition; High: Has or would sign)
- A165: Trust (Low: Be very careful; High: Most people can be trusted)

### Scenario Requirements:
1. Each scenario must present a realistic conflict (workplace, family, or legal) where a character must choose between the Low Value and the High Value.
2. Provide exactly two options (A and B). )" "\n"
      R"(3. Randomize whether Option A or B represents the Low or High Value.

### Output Format:
Return ONLY a valid JSON list of objects. Use this structure:
[
  {
    "wvs_id": "ID_HERE",
    "dimension": "...",
    "domain": "...",
    "scenario_text": "...",
    "options": {"A": "...", "B": "..."},
    "mapping": {"Dimension 1": "A or B", "Dimension 2": "A or B"}
  }
])";
  CHECK(emit_generation_prompt({}) == want);
}

TEST_CASE("generation prompt narrows to the configured ids and domains") {
  GenerationConfig cfg;
  cfg.wvs_ids = {"F063"};
  cfg.domains = {"legal"};
  std::string p = emit_generation_prompt(cfg);
  CHECK(p.find("1 WVS IDs and 1 Domains (legal)") != std::string::npos);
  CHECK(p.find("- F063:") != std::string::npos);
  CHECK(p.find("- A165:") == std::string::npos);
  CHECK(p.find("### Dimension 2") == std::string::npos);
  CHECK(p.find("realistic conflict (legal)") != std::string::npos);

  cfg.domains = {"workplace", "family"};
  CHECK(emit_generation_prompt(cfg).find("conflict (workplace or family)") !=
        std::string::npos);

  cfg.wvs_ids = {"bogus"};
  CHECK(code_of([&] { emit_generation_prompt(cfg); }) == Errc::unknown_wvs_id);
  cfg.wvs_ids = {"F063"};
  cfg.domains = {"maritime"};
  CHECK(code_of([&] { emit_generation_prompt(cfg); }) == Errc::bad_argument);
}
