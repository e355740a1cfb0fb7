// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/support.hpp"

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace testsupport {

std::filesystem::path data_dir() {
#ifdef CULTURESTEER_DATA_DIR
  return CULTURESTEER_DATA_DIR;
#else
  return "data";
#endif
}

std::filesystem::path cli_path() {
#ifdef CULTURESTEER_CLI_PATH
  return CULTURESTEER_CLI_PATH;
#else
  throw std::runtime_error("CULTURESTEER_CLI_PATH not configured");
#endif
}

TempDir::TempDir() {
  std::string tmpl =
      (std::filesystem::temp_directory_path() / "culturesteer-XXXXXX").string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (mkdtemp(buf.data()) == nullptr) {
    throw std::runtime_error("mkdtemp failed");
  }
  path_ = buf.data();
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

CliResult run_cli(const std::vector<std::string>& args,
                  const std::string& stdin_text) {
  std::string cmd = "'" + cli_path().string() + "'";
  for (const auto& a : args) {
    std::string quoted = "'";
    for (char ch : a) {
      if (ch == '\'') {
        quoted += "'\\''";
      } else {
        quoted += ch;
      }
    }
    quoted += "'";
    cmd += " " + quoted;
  }
  CliResult res;
  if (!stdin_text.empty()) {
    TempDir dir;
    auto in_path = dir.file("stdin.txt");
    write_text_file(in_path, stdin_text);
    cmd += " < '" + in_path.string() + "'";
    cmd += " 2>&1";
    std::FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) throw std::runtime_error("popen failed");
    std::array<char, 4096> chunk{};
    std::size_t n;
    while ((n = fread(chunk.data(), 1, chunk.size(), pipe)) > 0) {
      res.out.append(chunk.data(), n);
    }
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
  }
  cmd += " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed");
  std::array<char, 4096> chunk{};
  std::size_t n;
  while ((n = fread(chunk.data(), 1, chunk.size(), pipe)) > 0) {
    res.out.append(chunk.data(), n);
  }
  int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq = 256;
  c.init_seed = 42;
  return c;
}

namespace {

// Zero-sum unit direction occupying one coordinate pair.
std::vector<float> pair_direction(int d, int lo) {
  std::vector<float> v(d, 0.0f);
  const float s = 1.0f / std::sqrt(2.0f);
  v[lo] = s;
  v[lo + 1] = -s;
  return v;
}

Tensor zeros(std::vector<std::int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(t.numel(), 0.0f);
  return t;
}

Tensor ones(std::vector<std::int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(t.numel(), 1.0f);
  return t;
}

TensorFile blank_weights(const ModelConfig& c) {
  TensorFile tf;
  tf.kind = "model-weights";
  for (const auto& [name, shape] : expected_tensors(c)) {
    bool gain = name.size() >= 7 &&
                name.compare(name.size() - 7, 7, ".weight") == 0;
    tf.tensors.emplace_back(name, gain ? ones(shape) : zeros(shape));
  }
  return tf;
}

Tensor& tensor_ref(TensorFile& tf, const std::string& name) {
  for (auto& [n, t] : tf.tensors) {
    if (n == name) return t;
  }
  throw std::runtime_error("no tensor " + name);
}

}  // namespace

ModelHandle PlantedModel::handle() const { return ModelHandle(config, weights); }

SteeringVectorSet PlantedModel::vector_set(Axis axis) const {
  SteeringVectorSet set;
  set.axis = axis;
  set.n = 1;
  set.vectors[0] = w0;
  set.vectors[1] = axis == Axis::y ? u : mv;
  set.vectors[2] = w2;
  return set;
}

PlantedModel make_planted_model() {
  PlantedModel p;
  p.config.d_model = 16;
  p.config.n_heads = 2;
  p.config.n_layers = 3;
  p.config.d_ff = 4;
  p.config.max_seq = 256;

  const int d = p.config.d_model;
  p.u = pair_direction(d, 0);
  p.mv = pair_direction(d, 2);
  p.q = pair_direction(d, 4);
  p.z = pair_direction(d, 6);
  p.g = pair_direction(d, 8);
  p.w0 = pair_direction(d, 10);
  p.w2 = pair_direction(d, 12);

  TensorFile tf = blank_weights(p.config);

  // Final prompt token '?' carries 2z so layer norms see stable variance.
  Tensor& tok = tensor_ref(tf, "tok_emb");
  const Token qmark = encode("?")[0];
  for (int i = 0; i < d; ++i) {
    tok.data[static_cast<std::size_t>(qmark) * d + i] = 2.0f * p.z[i];
  }
  // Tied head: 'A' reads +c g, 'B' reads -c g.
  const Token ta = encode("A")[0];
  const Token tb = encode("B")[0];
  for (int i = 0; i < d; ++i) {
    tok.data[static_cast<std::size_t>(ta) * d + i] = p.c * p.g[i];
    tok.data[static_cast<std::size_t>(tb) * d + i] = -p.c * p.g[i];
  }

  // Odd positions carry the parity marker beta q.
  Tensor& pos = tensor_ref(tf, "pos_emb");
  for (int row = 1; row < p.config.max_seq; row += 2) {
    for (int i = 0; i < d; ++i) {
      pos.data[static_cast<std::size_t>(row) * d + i] = p.beta * p.q[i];
    }
  }

  // Block 2 feed-forward gate. Four hidden units in two compensated pairs:
  //   unit0 - unit1 = GELU(on_y + u.x) - GELU(on_y)   (marked prompts)
  //   unit2 - unit3 = GELU(on_x + mv.x) - GELU(on_x)  (unmarked prompts)
  // where on_y = kappa (q.x - 1/2) and on_x = kappa (1/2 - q.x). Each pair
  // cancels exactly when its control direction is absent, so the baseline
  // logit gap is zero and the decoy layers cannot move it.
  Tensor& w1 = tensor_ref(tf, "blocks.2.ff.w1");
  Tensor& b1 = tensor_ref(tf, "blocks.2.ff.b1");
  Tensor& w2t = tensor_ref(tf, "blocks.2.ff.w2");
  for (int i = 0; i < d; ++i) {
    w1.data[0 * d + i] = p.kappa * p.q[i] + p.u[i];
    w1.data[1 * d + i] = p.kappa * p.q[i];
    w1.data[2 * d + i] = -p.kappa * p.q[i] + p.mv[i];
    w1.data[3 * d + i] = -p.kappa * p.q[i];
  }
  b1.data[0] = -p.kappa / 2.0f;
  b1.data[1] = -p.kappa / 2.0f;
  b1.data[2] = p.kappa / 2.0f;
  b1.data[3] = p.kappa / 2.0f;
  for (int i = 0; i < d; ++i) {
    w2t.data[static_cast<std::size_t>(i) * p.config.d_ff + 0] = p.r * p.g[i];
    w2t.data[static_cast<std::size_t>(i) * p.config.d_ff + 1] = -p.r * p.g[i];
    w2t.data[static_cast<std::size_t>(i) * p.config.d_ff + 2] = p.r * p.g[i];
    w2t.data[static_cast<std::size_t>(i) * p.config.d_ff + 3] = -p.r * p.g[i];
  }

  p.weights = std::move(tf);
  return p;
}

std::vector<Scenario> planted_scenarios(int per_qid,
                                        std::uint64_t global_seed) {
  std::vector<Scenario> out;
  for (const std::string& qid : all_qids()) {
    for (int i = 0; i < per_qid; ++i) {
      Scenario s;
      s.qid = qid;
      s.wvs_id = wvs_for_qid(qid);
      s.axis = axis_for_qid(qid);
      s.domain = i % 3 == 0   ? Domain::family
                 : i % 3 == 1 ? Domain::workplace
                              : Domain::legal;
      s.scenario_text = "Case " + std::to_string(i) + " for " + qid +
                        ": a colleague asks for your call";
      s.option_low = "They wait";
      s.option_high = "They act";
      // Mine an id that labels HighIsA under the probe seed.
      for (int salt = 0;; ++salt) {
        s.id = "plant-" + qid + "-" + std::to_string(i) + "-" +
               std::to_string(salt);
        if (assign_label(s, global_seed).key == LabelKey::high_is_a) break;
      }
      // Pad until the final token position (body length - 1) is odd exactly
      // for Y-axis questions, matching the planted parity marker.
      bool want_marker = s.axis == Axis::y;
      while (((render_body(assign_label(s, global_seed)).size() - 1) % 2 ==
              1) != want_marker) {
        s.scenario_text += ".";
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

ModelHandle logit_rig_model(const std::map<Token, double>& desired) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 4;
  c.max_seq = 64;
  const int d = c.d_model;
  std::vector<float> z = pair_direction(d, 6);

  TensorFile tf = blank_weights(c);
  Tensor& tok = tensor_ref(tf, "tok_emb");
  const Token base = encode("Z")[0];
  for (int i = 0; i < d; ++i) {
    tok.data[static_cast<std::size_t>(base) * d + i] = 2.0f * z[i];
  }
  // After LN the base content is 2z / sigma with sigma = sqrt(1/4 + eps), so
  // a row lambda z scores lambda * 2 / sigma; solve lambda per target.
  const double sigma = std::sqrt(0.25 + 1e-5);
  for (const auto& [token, value] : desired) {
    const float lambda = static_cast<float>(value * sigma / 2.0);
    for (int i = 0; i < d; ++i) {
      tok.data[static_cast<std::size_t>(token) * d + i] = lambda * z[i];
    }
  }
  return ModelHandle(c, std::move(tf));
}

std::vector<std::vector<float>> capture_all_layers(const ModelHandle& model,
                                                   const std::string& text,
                                                   const InterventionSpec& spec) {
  Session session(model);
  session.set_interventions(spec);
  for (int l = 0; l < model.config().n_layers; ++l) {
    session.request_capture(l, Session::kLastPosition);
  }
  session.forward_last_logits(encode(text));
  std::vector<std::vector<float>> out;
  for (int l = 0; l < model.config().n_layers; ++l) {
    out.push_back(session.captured(l, Session::kLastPosition));
  }
  return out;
}

long double softmax_pair_ld(long double z_pos, long double z_neg) {
  long double m = z_pos > z_neg ? z_pos : z_neg;
  long double ep = expl(z_pos - m);
  long double en = expl(z_neg - m);
  return ep / (ep + en);
}

}  // namespace testsupport
