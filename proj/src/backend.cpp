// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/backend.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace culturesteer {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

InterventionSpec interventions_from_json(const json& j) {
  InterventionSpec spec;
  if (j.is_null()) return spec;
  for (const auto& e : j) {
    Intervention iv;
    iv.layer = e.at("layer").get<int>();
    iv.alpha = e.at("alpha").get<float>();
    iv.vector = e.at("vector").get<std::vector<float>>();
    spec.entries.push_back(std::move(iv));
  }
  return spec;
}

json interventions_to_json(const InterventionSpec& spec) {
  json arr = json::array();
  for (const auto& e : spec.entries) {
    json o;
    o["layer"] = e.layer;
    o["alpha"] = e.alpha;
    o["vector"] = e.vector;
    arr.push_back(std::move(o));
  }
  return arr;
}

std::string error_response(const std::string& code, const std::string& message) {
  ordered_json j;
  j["ok"] = false;
  j["error"] = code;
  j["message"] = message;
  return j.dump();
}

// The persona/system text combines with the prompt exactly as the in-process
// prober renders it, so both routes see identical token streams.
std::string combined_prompt(const json& req) {
  std::string prompt = req.at("prompt").get<std::string>();
  if (req.contains("system") && !req.at("system").is_null()) {
    return req.at("system").get<std::string>() + "\n\n" + prompt;
  }
  return prompt;
}

}  // namespace

std::string backend_handle_line(const std::string& line,
                                const ModelHandle& model, bool* shutdown) {
  if (shutdown) *shutdown = false;
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception& e) {
    return error_response("ParseError", e.what());
  }
  try {
    std::string op = req.at("op").get<std::string>();
    if (op == "hello") {
      ordered_json resp;
      resp["ok"] = true;
      resp["protocol"] = 1;
      resp["d_model"] = model.config().d_model;
      resp["n_layers"] = model.config().n_layers;
      resp["max_seq"] = model.config().max_seq;
      resp["vocab_size"] = model.config().vocab_size;
      resp["letters"] = {{"A", encode("A")[0]}, {"B", encode("B")[0]}};
      return resp.dump();
    }
    if (op == "shutdown") {
      if (shutdown) *shutdown = true;
      ordered_json resp;
      resp["ok"] = true;
      resp["bye"] = true;
      return resp.dump();
    }

    Session session(model);
    if (req.contains("interventions")) {
      session.set_interventions(interventions_from_json(req["interventions"]));
    }
    if (op == "logits") {
      std::vector<float> logits =
          session.forward_last_logits(encode(combined_prompt(req)));
      ordered_json resp;
      resp["ok"] = true;
      resp["logits"] = logits;
      return resp.dump();
    }
    if (op == "generate") {
      std::vector<Token> out = session.generate(
          encode(combined_prompt(req)), req.value("max_new", 128),
          req.value("temperature", 0.7), req.value("seed", 0ull));
      ordered_json resp;
      resp["ok"] = true;
      resp["tokens"] = out;
      // Sampled bytes need not form valid UTF-8; the text field is a lossy
      // preview, the tokens field is authoritative.
      resp["text"] = decode(out);
      return resp.dump(-1, ' ', false,
                       ordered_json::error_handler_t::replace);
    }
    if (op == "perplexity") {
      double ppl = session.perplexity(
          encode(combined_prompt(req)), req.value("window", 128),
          req.value("temperature", 0.7), req.value("seed", 0ull),
          req.value("score_with_baseline", false));
      ordered_json resp;
      resp["ok"] = true;
      resp["perplexity"] = ppl;
      return resp.dump();
    }
    return error_response("BadArgument", "unknown op '" + op + "'");
  } catch (const Error& e) {
    return error_response(errc_name(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response("ParseError", e.what());
  } catch (const std::exception& e) {
    return error_response("BackendFailure", e.what());
  }
}

void serve_backend(std::istream& in, std::ostream& out,
                   const ModelHandle& model) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    bool shutdown = false;
    out << backend_handle_line(line, model, &shutdown) << "\n";
    out.flush();
    if (shutdown) break;
  }
}

// ---------------------------------------------------------------------------
// Subprocess client
// ---------------------------------------------------------------------------

SubprocessBackend::SubprocessBackend(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(Errc::bad_argument, "empty backend argv");
  int to_child[2], from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw Error(Errc::backend_failure, "pipe() failed");
  }
  pid_ = fork();
  if (pid_ < 0) throw Error(Errc::backend_failure, "fork() failed");
  if (pid_ == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    std::perror("execvp");
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  to_child_ = fdopen(to_child[1], "w");
  from_child_ = fdopen(from_child[0], "r");
  if (!to_child_ || !from_child_) {
    throw Error(Errc::backend_failure, "fdopen() failed");
  }
  hello();
}

SubprocessBackend::~SubprocessBackend() {
  if (to_child_) {
    std::fputs("{\"op\":\"shutdown\"}\n", to_child_);
    std::fflush(to_child_);
    std::fclose(to_child_);
  }
  if (from_child_) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

std::string SubprocessBackend::roundtrip(const std::string& request_line) {
  if (std::fputs(request_line.c_str(), to_child_) == EOF ||
      std::fputc('\n', to_child_) == EOF || std::fflush(to_child_) != 0) {
    throw Error(Errc::backend_failure, "write to backend failed");
  }
  std::string line;
  int c;
  while ((c = std::fgetc(from_child_)) != EOF && c != '\n') {
    line.push_back(static_cast<char>(c));
  }
  if (line.empty() && c == EOF) {
    throw Error(Errc::backend_failure, "backend closed the stream");
  }
  return line;
}

namespace {

json parse_response(const std::string& line) {
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::backend_failure,
                std::string("unparseable backend response: ") + e.what());
  }
  if (!resp.value("ok", false)) {
    throw Error(Errc::backend_failure,
                resp.value("error", "?") + ": " + resp.value("message", ""));
  }
  return resp;
}

}  // namespace

void SubprocessBackend::hello() {
  json resp = parse_response(roundtrip("{\"op\":\"hello\"}"));
  try {
    d_model_ = resp.at("d_model").get<int>();
    n_layers_ = resp.at("n_layers").get<int>();
    for (auto it = resp.at("letters").begin(); it != resp.at("letters").end();
         ++it) {
      letters_[it.key()] = it.value().get<Token>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::backend_failure,
                std::string("bad hello response: ") + e.what());
  }
  if (letters_.find("A") == letters_.end() ||
      letters_.find("B") == letters_.end()) {
    throw Error(Errc::backend_failure, "backend declared no A/B letter tokens");
  }
}

void SubprocessBackend::set_interventions(InterventionSpec spec) {
  interventions_ = std::move(spec);
}

std::vector<double> SubprocessBackend::logits(
    const std::string& prompt, const std::optional<std::string>& system_text) {
  json req;
  req["op"] = "logits";
  req["prompt"] = prompt;
  if (system_text) req["system"] = *system_text;
  if (!interventions_.entries.empty()) {
    req["interventions"] = interventions_to_json(interventions_);
  }
  json resp = parse_response(roundtrip(req.dump()));
  return resp.at("logits").get<std::vector<double>>();
}

std::pair<double, double> SubprocessBackend::option_logits(
    const std::string& body, const std::optional<std::string>& system_text) {
  std::vector<double> all = logits(body, system_text);
  Token a = letters_.at("A");
  Token b = letters_.at("B");
  if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= all.size() ||
      static_cast<std::size_t>(b) >= all.size()) {
    throw Error(Errc::backend_failure, "letter token outside logit range");
  }
  return {all[static_cast<std::size_t>(a)], all[static_cast<std::size_t>(b)]};
}

std::string SubprocessBackend::generate(const std::string& prompt, int max_new,
                                        double temperature,
                                        std::uint64_t seed) {
  json req;
  req["op"] = "generate";
  req["prompt"] = prompt;
  req["max_new"] = max_new;
  req["temperature"] = temperature;
  req["seed"] = seed;
  if (!interventions_.entries.empty()) {
    req["interventions"] = interventions_to_json(interventions_);
  }
  json resp = parse_response(roundtrip(req.dump()));
  // Rebuild from tokens: the text field replaces invalid UTF-8 sequences.
  return decode(resp.at("tokens").get<std::vector<Token>>());
}

double SubprocessBackend::perplexity(const std::string& prompt, int window,
                                     double temperature, std::uint64_t seed,
                                     bool score_with_baseline) {
  json req;
  req["op"] = "perplexity";
  req["prompt"] = prompt;
  req["window"] = window;
  req["temperature"] = temperature;
  req["seed"] = seed;
  req["score_with_baseline"] = score_with_baseline;
  if (!interventions_.entries.empty()) {
    req["interventions"] = interventions_to_json(interventions_);
  }
  json resp = parse_response(roundtrip(req.dump()));
  return resp.at("perplexity").get<double>();
}

}  // namespace culturesteer
