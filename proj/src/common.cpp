// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <mutex>
#include <thread>

namespace culturesteer {

int exit_class(Errc code) {
  switch (code) {
    case Errc::bad_config:
    case Errc::zero_alpha:
    case Errc::alpha_over_cap:
    case Errc::empty_axis:
    case Errc::empty_pairs:
    case Errc::empty_prompts:
    case Errc::empty_country:
    case Errc::unknown_country:
    case Errc::missing_range:
    case Errc::bad_argument:
      return 1;
    case Errc::parse_error:
    case Errc::unknown_wvs_id:
    case Errc::inconsistent_dimension:
    case Errc::invalid_mapping:
    case Errc::duplicate_id:
    case Errc::empty_dataset:
    case Errc::invalid_dataset:
    case Errc::empty_config:
    case Errc::shape_mismatch:
    case Errc::missing_variable:
    case Errc::missing_name:
    case Errc::dangling_scenario:
    case Errc::degenerate_variance:
    case Errc::missing_artifact:
      return 2;
    default:
      return 3;
  }
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::bad_config: return "BadConfig";
    case Errc::zero_alpha: return "ZeroAlpha";
    case Errc::alpha_over_cap: return "AlphaOverCap";
    case Errc::empty_axis: return "EmptyAxis";
    case Errc::empty_pairs: return "EmptyPairs";
    case Errc::empty_prompts: return "EmptyPrompts";
    case Errc::empty_country: return "EmptyCountry";
    case Errc::unknown_country: return "UnknownCountry";
    case Errc::missing_range: return "MissingRange";
    case Errc::bad_argument: return "BadArgument";
    case Errc::parse_error: return "ParseError";
    case Errc::unknown_wvs_id: return "UnknownWvsId";
    case Errc::inconsistent_dimension: return "InconsistentDimension";
    case Errc::invalid_mapping: return "InvalidMapping";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::invalid_dataset: return "InvalidDataset";
    case Errc::empty_config: return "EmptyConfig";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::missing_variable: return "MissingVariable";
    case Errc::missing_name: return "MissingName";
    case Errc::dangling_scenario: return "DanglingScenario";
    case Errc::degenerate_variance: return "DegenerateVariance";
    case Errc::missing_artifact: return "MissingArtifact";
    case Errc::io_error: return "IoError";
    case Errc::token_out_of_range: return "TokenOutOfRange";
    case Errc::sequence_too_long: return "SequenceTooLong";
    case Errc::empty_continuation: return "EmptyContinuation";
    case Errc::zero_intended_shift: return "ZeroIntendedShift";
    case Errc::missing_layer_vector: return "MissingLayerVector";
    case Errc::backend_failure: return "BackendFailure";
  }
  return "UnknownError";
}

const char* axis_name(Axis a) { return a == Axis::x ? "X" : "Y"; }

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::family: return "family";
    case Domain::workplace: return "workplace";
    case Domain::legal: return "legal";
  }
  return "?";
}

Axis parse_axis(std::string_view s) {
  if (s == "x" || s == "X") return Axis::x;
  if (s == "y" || s == "Y") return Axis::y;
  throw Error(Errc::bad_argument, "unknown axis '" + std::string(s) + "'");
}

Domain parse_domain(std::string_view s) {
  if (s == "family") return Domain::family;
  if (s == "workplace") return Domain::workplace;
  if (s == "legal") return Domain::legal;
  throw Error(Errc::bad_argument, "unknown domain '" + std::string(s) + "'");
}

std::uint64_t Rng::bounded(std::uint64_t n) {
  if (n == 0) throw Error(Errc::bad_argument, "bounded(0)");
  // Largest multiple of n that fits in 64 bits; values above it are rejected.
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

double Rng::normal() {
  // u1 must be nonzero for the log.
  double u1;
  do {
    u1 = uniform();
  } while (u1 == 0.0);
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (jobs < 1) jobs = 1;
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        // Strided assignment: item i belongs to worker i % workers. The
        // assignment affects scheduling only, never results.
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(Errc::parse_error, "bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace culturesteer
