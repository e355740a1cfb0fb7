// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_COMMON_HPP_
#define CULTURESTEER_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace culturesteer {

// ---------------------------------------------------------------------------
// Errors. Every failure the library raises carries a stable code so callers
// (CLI, bindings, backend protocol) can map it without parsing messages.
// ---------------------------------------------------------------------------

enum class Errc {
  // usage class: the caller asked for something contradictory or out of range
  bad_config,
  zero_alpha,
  alpha_over_cap,
  empty_axis,
  empty_pairs,
  empty_prompts,
  empty_country,
  unknown_country,
  missing_range,
  bad_argument,
  // data class: an input file or record is malformed or inconsistent
  parse_error,
  unknown_wvs_id,
  inconsistent_dimension,
  invalid_mapping,
  duplicate_id,
  empty_dataset,
  invalid_dataset,
  empty_config,
  shape_mismatch,
  missing_variable,
  missing_name,
  dangling_scenario,
  degenerate_variance,
  missing_artifact,
  // runtime class: a computation could not proceed
  io_error,
  token_out_of_range,
  sequence_too_long,
  empty_continuation,
  zero_intended_shift,
  missing_layer_vector,
  backend_failure,
};

// Process exit classes: 1 usage, 2 data, 3 runtime.
int exit_class(Errc code);

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

// ---------------------------------------------------------------------------
// Axes and domains of the scenario corpus.
// ---------------------------------------------------------------------------

// x = survival vs. self-expression, y = traditional vs. secular-rational.
enum class Axis { x, y };

enum class Domain { family, workplace, legal };

const char* axis_name(Axis a);          // "X" / "Y"
const char* domain_name(Domain d);      // "family" / "workplace" / "legal"
Axis parse_axis(std::string_view s);    // accepts "x"/"X"/"y"/"Y"
Domain parse_domain(std::string_view s);

// ---------------------------------------------------------------------------
// Deterministic hashing and RNG. All randomized behavior in the library is
// derived from these primitives so that results are reproducible across
// platforms, runs, and worker counts. See docs/formats.md for the exact
// definitions, which are frozen.
// ---------------------------------------------------------------------------

// SplitMix64 finalizer. Bijective on 64-bit values.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a over the raw bytes of `key`.
constexpr std::uint64_t fnv1a64(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Stable seed derivation: combine a numeric seed with a string context.
constexpr std::uint64_t hash64(std::uint64_t seed, std::string_view key) {
  return mix64(mix64(seed) ^ fnv1a64(key));
}

// SplitMix64 stream generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 bits of mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t bounded(std::uint64_t n);

  // Standard normal via Box-Muller on two uniform() draws.
  double normal();

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Deterministic parallel map. Work item i writes only slot i of its output;
// the result is identical for any jobs >= 1.
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Locale-free numeric formatting (shortest round-trip, as in JSON output).
// ---------------------------------------------------------------------------

std::string fmt_double(double v);
double parse_double(std::string_view s);

}  // namespace culturesteer

#endif  // CULTURESTEER_COMMON_HPP_
