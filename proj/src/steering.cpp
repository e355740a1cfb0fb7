// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/steering.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace culturesteer {

using ordered_json = nlohmann::ordered_json;

const std::vector<float>& SteeringVectorSet::at(int layer) const {
  auto it = vectors.find(layer);
  if (it == vectors.end()) {
    throw Error(Errc::missing_layer_vector,
                "no vector for layer " + std::to_string(layer));
  }
  return it->second;
}

std::vector<ContrastPair> build_pairs(const std::vector<Scenario>& scenarios,
                                      Axis axis) {
  std::vector<ContrastPair> out;
  for (const auto& s : scenarios) {
    if (s.axis != axis) continue;
    ContrastPair p;
    p.scenario_id = s.id;
    p.text_pos = s.scenario_text + " " + s.option_high;
    p.text_neg = s.scenario_text + " " + s.option_low;
    out.push_back(std::move(p));
  }
  return out;
}

SteeringVectorSet extract_vectors(const ModelHandle& model,
                                  const std::vector<ContrastPair>& pairs,
                                  Axis axis, int jobs) {
  if (pairs.empty()) throw Error(Errc::empty_pairs, "no contrast pairs");
  const int n_layers = model.config().n_layers;
  const int d = model.config().d_model;

  // Per-pair differences land in their own slot; the sum below runs in pair
  // order regardless of worker count.
  std::vector<std::vector<std::vector<float>>> diffs(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    Session session(model);
    for (int l = 0; l < n_layers; ++l) {
      session.request_capture(l, Session::kLastPosition);
    }
    std::vector<std::vector<float>> pos(n_layers), neg(n_layers);
    session.forward_last_logits(encode(pairs[i].text_pos));
    for (int l = 0; l < n_layers; ++l) {
      pos[l] = session.captured(l, Session::kLastPosition);
    }
    session.forward_last_logits(encode(pairs[i].text_neg));
    for (int l = 0; l < n_layers; ++l) {
      neg[l] = session.captured(l, Session::kLastPosition);
    }
    diffs[i].resize(n_layers);
    for (int l = 0; l < n_layers; ++l) {
      diffs[i][l].resize(d);
      for (int c = 0; c < d; ++c) diffs[i][l][c] = pos[l][c] - neg[l][c];
    }
  });

  SteeringVectorSet set;
  set.axis = axis;
  set.n = static_cast<int>(pairs.size());
  for (int l = 0; l < n_layers; ++l) {
    std::vector<double> acc(d, 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (int c = 0; c < d; ++c) acc[c] += diffs[i][l][c];
    }
    std::vector<float> v(d);
    for (int c = 0; c < d; ++c) {
      v[c] = static_cast<float>(acc[c] / static_cast<double>(pairs.size()));
    }
    set.vectors[l] = std::move(v);
  }
  return set;
}

InterventionSpec make_interventions(const SteeringVectorSet& vectors,
                                    const std::vector<int>& layers,
                                    double alpha) {
  InterventionSpec spec;
  for (int l : layers) {
    Intervention e;
    e.layer = l;
    e.vector = vectors.at(l);
    e.alpha = static_cast<float>(alpha);
    spec.entries.push_back(std::move(e));
  }
  return spec;
}

namespace {

// One probe pass over the set; slot-indexed so any worker count yields the
// same vector.
std::vector<ProbeResult> probe_pass(const ModelHandle& model,
                                    const InterventionSpec& spec,
                                    const std::vector<LabeledScenario>& probes,
                                    const PersonaProfile* persona, int jobs) {
  std::vector<ProbeResult> results(probes.size());
  parallel_for(probes.size(), jobs, [&](std::size_t i) {
    TinyModelScorer scorer(model, spec);
    results[i] = probe(scorer, probes[i], persona);
  });
  return results;
}

}  // namespace

LayerSearchReport layer_search(const ModelHandle& model,
                               const SteeringVectorSet& vectors,
                               const std::vector<LabeledScenario>& probe_set,
                               double alpha, int k, double threshold,
                               int jobs) {
  if (alpha == 0.0) {
    throw Error(Errc::zero_alpha, "layer search undefined at alpha 0");
  }
  if (probe_set.empty()) throw Error(Errc::empty_axis, "empty probe set");
  const int n_layers = model.config().n_layers;

  std::vector<ProbeResult> baseline =
      probe_pass(model, {}, probe_set, nullptr, jobs);

  LayerSearchReport report;
  report.alpha = alpha;
  report.threshold = threshold;

  std::vector<std::vector<ProbeResult>> steered(
      static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    InterventionSpec spec = make_interventions(vectors, {l}, alpha);
    steered[static_cast<std::size_t>(l)] =
        probe_pass(model, spec, probe_set, nullptr, jobs);
  }

  for (int l = 0; l < n_layers; ++l) {
    // qid -> (sum of differentials, count), accumulated in probe_set order.
    std::map<std::string, std::pair<double, int>> per_qid;
    for (std::size_t i = 0; i < probe_set.size(); ++i) {
      auto& acc = per_qid[probe_set[i].scenario.qid];
      acc.first +=
          steered[static_cast<std::size_t>(l)][i].p_high - baseline[i].p_high;
      acc.second += 1;
    }
    double mean_abs = 0.0;
    for (const auto& [qid, acc] : per_qid) {
      double differential = acc.first / acc.second;
      report.cells[{l, qid}] = differential;
      mean_abs += std::abs(differential);
    }
    report.layer_means[l] = mean_abs / static_cast<double>(per_qid.size());
  }

  std::vector<int> order(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) order[static_cast<std::size_t>(l)] = l;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return report.layer_means.at(a) > report.layer_means.at(b);
  });
  int take = std::min(k, n_layers);
  report.selected.assign(order.begin(), order.begin() + take);
  return report;
}

std::map<std::string, LayerSearchReport::QidMax> LayerSearchReport::qid_max()
    const {
  std::map<std::string, QidMax> out;
  for (const auto& [key, differential] : cells) {
    const auto& [layer, qid] = key;
    auto it = out.find(qid);
    if (it == out.end() ||
        std::abs(differential) > std::abs(it->second.differential)) {
      QidMax m;
      m.layer = layer;
      m.differential = differential;
      m.meets_threshold = std::abs(differential) >= threshold;
      out[qid] = m;
    }
  }
  return out;
}

std::string LayerSearchReport::to_json() const {
  ordered_json j;
  j["alpha"] = alpha;
  j["threshold"] = threshold;
  j["selected"] = selected;
  ordered_json means = ordered_json::object();
  for (const auto& [layer, mean] : layer_means) {
    means[std::to_string(layer)] = mean;
  }
  j["layer_means"] = std::move(means);
  ordered_json grid = ordered_json::array();
  for (const auto& [key, differential] : cells) {
    ordered_json cell;
    cell["layer"] = key.first;
    cell["qid"] = key.second;
    cell["differential"] = differential;
    grid.push_back(std::move(cell));
  }
  j["cells"] = std::move(grid);
  ordered_json maxima = ordered_json::object();
  for (const auto& [qid, m] : qid_max()) {
    ordered_json entry;
    entry["layer"] = m.layer;
    entry["differential"] = m.differential;
    entry["meets_threshold"] = m.meets_threshold;
    maxima[qid] = std::move(entry);
  }
  j["qid_max"] = std::move(maxima);
  return j.dump(2);
}

std::string LayerSearchReport::to_csv() const {
  std::string csv = "layer,qid,differential\n";
  for (const auto& [key, differential] : cells) {
    csv += std::to_string(key.first);
    csv += ',';
    csv += key.second;
    csv += ',';
    csv += fmt_double(differential);
    csv += '\n';
  }
  return csv;
}

std::vector<ProbeResult> steered_probe(
    const ModelHandle& model, const SteeringVectorSet& vectors,
    const std::vector<int>& layers, double alpha,
    const std::vector<LabeledScenario>& probe_set,
    const PersonaProfile* persona, double alpha_cap, bool force, int jobs) {
  if (layers.empty()) throw Error(Errc::bad_argument, "no layers given");
  if (std::abs(alpha) > alpha_cap && !force) {
    throw Error(Errc::alpha_over_cap,
                "alpha " + fmt_double(alpha) + " exceeds cap " +
                    fmt_double(alpha_cap) + " (pass force to override)");
  }
  InterventionSpec spec = make_interventions(vectors, layers, alpha);
  return probe_pass(model, spec, probe_set, persona, jobs);
}

void save_vectors(const std::filesystem::path& path,
                  const SteeringVectorSet& set) {
  TensorFile tf;
  tf.kind = "steering-vectors";
  tf.meta["axis"] = axis_name(set.axis);
  tf.meta["n"] = std::to_string(set.n);
  for (const auto& [layer, v] : set.vectors) {
    Tensor t;
    t.shape = {static_cast<std::int64_t>(v.size())};
    t.data = v;
    tf.tensors.emplace_back("layer." + std::to_string(layer), std::move(t));
  }
  write_tensor_file(path, tf);
}

SteeringVectorSet load_vectors(const std::filesystem::path& path) {
  TensorFile tf = read_tensor_file(path);
  if (tf.kind != "steering-vectors") {
    throw Error(Errc::parse_error, path.string() + ": not a vector file");
  }
  SteeringVectorSet set;
  try {
    set.axis = parse_axis(tf.meta.at("axis"));
    set.n = std::stoi(tf.meta.at("n"));
    for (auto& [name, tensor] : tf.tensors) {
      if (name.rfind("layer.", 0) != 0) {
        throw Error(Errc::parse_error,
                    path.string() + ": bad tensor '" + name + "'");
      }
      int layer = std::stoi(name.substr(6));
      set.vectors[layer] = std::move(tensor.data);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return set;
}

}  // namespace culturesteer
