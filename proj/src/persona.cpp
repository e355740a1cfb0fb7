// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/persona.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace culturesteer {

using nlohmann::json;

const char* persona_kind_name(PersonaKind k) {
  switch (k) {
    case PersonaKind::none: return "none";
    case PersonaKind::basic: return "basic";
    case PersonaKind::advanced: return "advanced";
  }
  return "?";
}

PersonaKind parse_persona_kind(std::string_view s) {
  if (s == "none") return PersonaKind::none;
  if (s == "basic") return PersonaKind::basic;
  if (s == "advanced") return PersonaKind::advanced;
  throw Error(Errc::bad_argument, "unknown persona kind '" + std::string(s) + "'");
}

PersonaProfile build_basic(const std::string& country) {
  if (country.empty()) throw Error(Errc::empty_country, "country is empty");
  PersonaProfile p;
  p.country = country;
  p.kind = PersonaKind::basic;
  p.text = "You are a person born in " + country + " and live in " + country;
  return p;
}

double nearest_category(double mean,
                        const std::vector<CodebookEntry>& entries) {
  if (entries.empty()) throw Error(Errc::empty_config, "no codebook entries");
  double best = entries.front().index;
  double best_dist = std::abs(entries.front().index - mean);
  for (const auto& e : entries) {
    double d = std::abs(e.index - mean);
    if (d < best_dist) {  // strict: ties keep the earlier (lower) index
      best_dist = d;
      best = e.index;
    }
  }
  return best;
}

namespace {

struct SentenceFrame {
  const char* variable;
  const char* prefix;
  const char* suffix;
};

// Sentence order and phrasing are frozen; only the description slot and the
// name/country opener vary. The child-qualities description carries its own
// final punctuation, every other frame supplies it.
constexpr std::array<SentenceFrame, 10> kFrames = {{
    {"A008", "You described yourself as ", "."},
    {"A165", "Generally speaking, you would say that ", "."},
    {"E018",
     "If greater respect for authority takes place in the near future, you "
     "think it would be ",
     "."},
    {"E025", "You have ", "."},
    {"F063", "In your life, you believe god is ", "."},
    {"F118", "You think homosexuality is ", "."},
    {"F120", "You think abortion is ", "."},
    {"G006", "You are ", " about your nationality."},
    {"Y002",
     "In the next 10 years, you think the most important goal for your "
     "country should be ",
     "."},
    {"Y003",
     "Given list of qualities that children can be encouraged to learn at "
     "home, ",
     ""},
}};

}  // namespace

const std::vector<std::string>& advanced_variables() {
  static const std::vector<std::string> vars = [] {
    std::vector<std::string> v;
    for (const auto& f : kFrames) v.push_back(f.variable);
    return v;
  }();
  return vars;
}

PersonaProfile build_advanced(const std::string& country,
                              const CountryStats& stats,
                              const Codebook& codebook,
                              const std::map<std::string, std::string>& names) {
  if (country.empty()) throw Error(Errc::empty_country, "country is empty");
  auto name_it = names.find(country);
  if (name_it == names.end()) {
    throw Error(Errc::missing_name, "no persona name for '" + country + "'");
  }
  PersonaProfile p;
  p.country = country;
  p.name = name_it->second;
  p.kind = PersonaKind::advanced;
  p.text = "You are " + p.name + ", a person from " + country + ". ";
  for (const auto& frame : kFrames) {
    auto mean_it = stats.means.find(frame.variable);
    if (mean_it == stats.means.end()) {
      throw Error(Errc::missing_variable,
                  std::string(frame.variable) + " absent from stats");
    }
    auto cb_it = codebook.entries.find(frame.variable);
    if (cb_it == codebook.entries.end()) {
      throw Error(Errc::missing_variable,
                  std::string(frame.variable) + " absent from codebook");
    }
    double idx = nearest_category(mean_it->second, cb_it->second);
    p.selections[frame.variable] = idx;
    const std::string* description = nullptr;
    for (const auto& e : cb_it->second) {
      if (e.index == idx) description = &e.description;
    }
    p.text += "\n";
    p.text += frame.prefix;
    p.text += *description;
    p.text += frame.suffix;
  }
  return p;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

}  // namespace

CountryStats load_stats(const std::filesystem::path& path) {
  json j = read_json_file(path);
  CountryStats s;
  try {
    s.country = j.at("country").get<std::string>();
    for (auto it = j.at("means").begin(); it != j.at("means").end(); ++it) {
      s.means[it.key()] = it.value().get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return s;
}

Codebook load_codebook(const std::filesystem::path& path) {
  json j = read_json_file(path);
  Codebook cb;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      std::vector<CodebookEntry> entries;
      for (const auto& e : it.value()) {
        CodebookEntry entry;
        entry.index = e.at("index").get<double>();
        entry.description = e.at("description").get<std::string>();
        if (entry.description.empty()) {
          throw Error(Errc::parse_error,
                      it.key() + ": empty codebook description");
        }
        if (!entries.empty() && entry.index <= entries.back().index) {
          throw Error(Errc::parse_error,
                      it.key() + ": codebook indices must strictly increase");
        }
        entries.push_back(std::move(entry));
      }
      cb.entries[it.key()] = std::move(entries);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return cb;
}

std::map<std::string, std::string> load_names(
    const std::filesystem::path& path) {
  json j = read_json_file(path);
  std::map<std::string, std::string> names;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      names[it.key()] = it.value().get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return names;
}

const std::map<std::string, std::string>& default_names() {
  static const std::map<std::string, std::string> names = {
      {"India", "Aarav"},
      {"Vietnam", "Minh"},
      {"Mexico", "Mateo"},
      {"Denmark", "Soren"},
  };
  return names;
}

}  // namespace culturesteer
