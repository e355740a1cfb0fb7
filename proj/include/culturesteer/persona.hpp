// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_PERSONA_HPP_
#define CULTURESTEER_PERSONA_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "culturesteer/common.hpp"

namespace culturesteer {

struct CountryStats {
  std::string country;
  std::map<std::string, double> means;  // wvs_variable -> country-level mean
};

struct CodebookEntry {
  double index = 0;
  std::string description;
};

struct Codebook {
  // wvs_variable -> categories ordered by strictly increasing index.
  std::map<std::string, std::vector<CodebookEntry>> entries;
};

enum class PersonaKind { none, basic, advanced };

const char* persona_kind_name(PersonaKind k);
PersonaKind parse_persona_kind(std::string_view s);

struct PersonaProfile {
  std::string country;
  std::string name;
  PersonaKind kind = PersonaKind::none;
  std::string text;
  std::map<std::string, double> selections;  // wvs_variable -> chosen index
};

// Fixed one-line national-identity preamble.
PersonaProfile build_basic(const std::string& country);

// Index of the entry nearest to `mean`; ties break toward the lower index.
double nearest_category(double mean, const std::vector<CodebookEntry>& entries);

// Statistics-grounded value profile: one sentence per configured variable in
// a fixed frame order, each carrying the codebook description whose index is
// nearest to the country mean.
PersonaProfile build_advanced(const std::string& country,
                              const CountryStats& stats,
                              const Codebook& codebook,
                              const std::map<std::string, std::string>& names);

// Variables used by build_advanced, in sentence order.
const std::vector<std::string>& advanced_variables();

CountryStats load_stats(const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);
std::map<std::string, std::string> load_names(const std::filesystem::path& path);
const std::map<std::string, std::string>& default_names();

}  // namespace culturesteer

#endif  // CULTURESTEER_PERSONA_HPP_
