// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace culturesteer {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

HumanAnchors load_anchors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  HumanAnchors a;
  try {
    json j = json::parse(in);
    for (auto it = j.begin(); it != j.end(); ++it) {
      double x = it.value().at("x").get<double>();
      double y = it.value().at("y").get<double>();
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw Error(Errc::parse_error, "non-finite anchor for " + it.key());
      }
      a.coords[it.key()] = {x, y};
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return a;
}

std::string CulturalCoordinate::to_json() const {
  ordered_json j;
  j["label"] = label;
  j["x"] = x;
  j["y"] = y;
  j["per_question"] = per_question;
  return j.dump(2);
}

CulturalCoordinate CulturalCoordinate::from_json(const std::string& text) {
  CulturalCoordinate c;
  try {
    json j = json::parse(text);
    c.label = j.value("label", "");
    c.x = j.at("x").get<double>();
    c.y = j.at("y").get<double>();
    if (j.contains("per_question")) {
      for (auto it = j["per_question"].begin(); it != j["per_question"].end();
           ++it) {
        c.per_question[it.key()] = it.value().get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  return c;
}

CulturalCoordinate project(const std::vector<QuestionScore>& scores,
                           const ProjectionConfig& calibration,
                           const std::string& label) {
  // Combine duplicate qids (e.g. per-domain scores) by n-weighted mean.
  std::map<std::string, std::pair<double, int>> per_qid;
  for (const auto& s : scores) {
    auto& acc = per_qid[s.qid];
    acc.first += s.mean_p * s.n;
    acc.second += s.n;
  }
  double sum_x = 0, sum_y = 0;
  int n_x = 0, n_y = 0;
  CulturalCoordinate c;
  c.label = label;
  for (const auto& [qid, acc] : per_qid) {
    double mean_p = acc.first / acc.second;
    c.per_question[qid] = mean_p;
    if (axis_for_qid(qid) == Axis::x) {
      sum_x += mean_p;
      ++n_x;
    } else {
      sum_y += mean_p;
      ++n_y;
    }
  }
  if (n_x == 0 || n_y == 0) {
    throw Error(Errc::empty_axis,
                std::string("no questions on axis ") + (n_x == 0 ? "X" : "Y"));
  }
  double raw_x = sum_x / n_x;
  double raw_y = sum_y / n_y;
  c.x = calibration.offset_x + calibration.scale_x * (2.0 * raw_x - 1.0);
  c.y = calibration.offset_y + calibration.scale_y * (2.0 * raw_y - 1.0);
  return c;
}

std::string EntanglementRecord::to_json() const {
  ordered_json j;
  j["target_axis"] = axis_name(target_axis);
  j["delta_intended"] = delta_intended;
  j["delta_unintended"] = delta_unintended;
  j["e"] = e;
  return j.dump(2);
}

EntanglementRecord entanglement(const CulturalCoordinate& baseline,
                                const CulturalCoordinate& steered,
                                Axis target_axis) {
  EntanglementRecord r;
  r.target_axis = target_axis;
  double dx = steered.x - baseline.x;
  double dy = steered.y - baseline.y;
  r.delta_intended = target_axis == Axis::x ? dx : dy;
  r.delta_unintended = target_axis == Axis::x ? dy : dx;
  if (r.delta_intended == 0.0) {
    throw Error(Errc::zero_intended_shift,
                "no shift along the steered axis; E is undefined");
  }
  r.e = std::abs(r.delta_unintended) / std::abs(r.delta_intended);
  return r;
}

double distance(const CulturalCoordinate& model_coord,
                const HumanAnchors& anchors, const std::string& country) {
  auto it = anchors.coords.find(country);
  if (it == anchors.coords.end()) {
    throw Error(Errc::unknown_country, "'" + country + "' not in anchors");
  }
  double dx = model_coord.x - it->second.first;
  double dy = model_coord.y - it->second.second;
  return std::sqrt(dx * dx + dy * dy);
}

double axis_correlation(const HumanAnchors& anchors) {
  const std::size_t n = anchors.coords.size();
  if (n < 2) {
    throw Error(Errc::degenerate_variance, "need at least 2 countries");
  }
  double mx = 0, my = 0;
  for (const auto& [country, xy] : anchors.coords) {
    mx += xy.first;
    my += xy.second;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& [country, xy] : anchors.coords) {
    double ax = xy.first - mx;
    double ay = xy.second - my;
    sxx += ax * ax;
    syy += ay * ay;
    sxy += ax * ay;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(Errc::degenerate_variance, "an axis has zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

ProjectionConfig calibrate(
    const std::vector<std::pair<CulturalCoordinate, std::pair<double, double>>>&
        model_vs_human) {
  if (model_vs_human.size() < 2) {
    throw Error(Errc::bad_argument, "need at least 2 calibration pairs");
  }
  // Fit target = offset + scale * (2*raw - 1) by ordinary least squares per
  // axis, where raw is recovered from the uncalibrated per_question means.
  auto fit = [&](Axis axis, double& offset, double& scale) {
    std::vector<double> u, t;
    for (const auto& [coord, human] : model_vs_human) {
      double sum = 0;
      int cnt = 0;
      for (const auto& [qid, mean_p] : coord.per_question) {
        if (axis_for_qid(qid) == axis) {
          sum += mean_p;
          ++cnt;
        }
      }
      if (cnt == 0) throw Error(Errc::empty_axis, "calibration pair lacks an axis");
      u.push_back(2.0 * (sum / cnt) - 1.0);
      t.push_back(axis == Axis::x ? human.first : human.second);
    }
    double mu = 0, mt = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      mu += u[i];
      mt += t[i];
    }
    mu /= static_cast<double>(u.size());
    mt /= static_cast<double>(t.size());
    double suu = 0, sut = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      suu += (u[i] - mu) * (u[i] - mu);
      sut += (u[i] - mu) * (t[i] - mt);
    }
    if (suu == 0.0) {
      throw Error(Errc::degenerate_variance,
                  "calibration inputs identical on an axis");
    }
    scale = sut / suu;
    offset = mt - scale * mu;
  };
  ProjectionConfig c;
  fit(Axis::x, c.offset_x, c.scale_x);
  fit(Axis::y, c.offset_y, c.scale_y);
  return c;
}

std::string DomainShiftMatrix::to_csv() const {
  std::string csv = "source,target,dx,dy\n";
  for (const auto& [key, shift] : cells) {
    csv += domain_name(key.first);
    csv += ',';
    csv += domain_name(key.second);
    csv += ',';
    csv += fmt_double(shift.first);
    csv += ',';
    csv += fmt_double(shift.second);
    csv += '\n';
  }
  return csv;
}

std::string DomainShiftMatrix::to_json() const {
  ordered_json j;
  j["axis_steered"] = axis_name(axis_steered);
  j["alpha"] = alpha;
  ordered_json rows = ordered_json::array();
  for (const auto& [key, shift] : cells) {
    ordered_json cell;
    cell["source"] = domain_name(key.first);
    cell["target"] = domain_name(key.second);
    cell["dx"] = shift.first;
    cell["dy"] = shift.second;
    rows.push_back(std::move(cell));
  }
  j["cells"] = std::move(rows);
  return j.dump(2);
}

DomainShiftMatrix domain_matrix(
    const std::map<Domain, SteeringVectorSet>& runs, const ModelHandle& model,
    const std::map<Domain, std::vector<LabeledScenario>>& probe_sets,
    double alpha, Axis axis, const std::vector<int>& layers,
    const ProjectionConfig& calibration, int jobs) {
  for (Domain d : {Domain::family, Domain::workplace, Domain::legal}) {
    if (runs.find(d) == runs.end()) {
      throw Error(Errc::bad_argument,
                  std::string("no vector set for source domain ") +
                      domain_name(d));
    }
    if (probe_sets.find(d) == probe_sets.end()) {
      throw Error(Errc::bad_argument,
                  std::string("no probe set for target domain ") +
                      domain_name(d));
    }
  }

  DomainShiftMatrix m;
  m.axis_steered = axis;
  m.alpha = alpha;

  auto coordinate_of = [&](const std::vector<LabeledScenario>& probes,
                           const std::vector<ProbeResult>& results) {
    std::vector<Scenario> scenarios;
    scenarios.reserve(probes.size());
    for (const auto& l : probes) scenarios.push_back(l.scenario);
    return project(aggregate(results, scenarios, GroupBy::qid), calibration);
  };

  std::map<Domain, CulturalCoordinate> baselines;
  for (const auto& [target, probes] : probe_sets) {
    std::vector<ProbeResult> results(probes.size());
    parallel_for(probes.size(), jobs, [&](std::size_t i) {
      TinyModelScorer scorer(model, {});
      results[i] = probe(scorer, probes[i], nullptr);
    });
    baselines[target] = coordinate_of(probes, results);
  }

  // Alpha validity against the cap is the caller's concern (the CLI enforces
  // it once); the matrix itself just applies the given interventions.
  for (const auto& [source, vectors] : runs) {
    InterventionSpec spec = make_interventions(vectors, layers, alpha);
    for (const auto& [target, probes] : probe_sets) {
      std::vector<ProbeResult> steered(probes.size());
      parallel_for(probes.size(), jobs, [&](std::size_t i) {
        TinyModelScorer scorer(model, spec);
        steered[i] = probe(scorer, probes[i], nullptr);
      });
      CulturalCoordinate c = coordinate_of(probes, steered);
      m.cells[{source, target}] = {c.x - baselines[target].x,
                                   c.y - baselines[target].y};
    }
  }
  return m;
}

std::vector<std::pair<double, double>> perplexity_curve(
    const ModelHandle& model, const SteeringVectorSet& vectors,
    const std::vector<int>& layers, const std::vector<double>& alphas,
    const std::vector<std::string>& prompts, int window, double temperature,
    std::uint64_t gen_seed, bool score_with_baseline, int jobs) {
  if (prompts.empty()) throw Error(Errc::empty_prompts, "no prompts");
  if (std::find(alphas.begin(), alphas.end(), 0.0) == alphas.end()) {
    throw Error(Errc::bad_argument, "alphas must include 0");
  }
  std::vector<std::pair<double, double>> curve;
  for (double alpha : alphas) {
    InterventionSpec spec = make_interventions(vectors, layers, alpha);
    std::vector<double> ppl(prompts.size());
    parallel_for(prompts.size(), jobs, [&](std::size_t i) {
      Session session(model);
      session.set_interventions(spec);
      std::vector<Token> tokens = encode(prompts[i]);
      ppl[i] = session.perplexity(tokens, window, temperature,
                                  hash64(gen_seed, "ppl:" + std::to_string(i)),
                                  score_with_baseline);
    });
    double mean = 0;
    for (double p : ppl) mean += p;
    curve.emplace_back(alpha, mean / static_cast<double>(ppl.size()));
  }
  return curve;
}

}  // namespace culturesteer
