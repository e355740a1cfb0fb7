// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_BACKEND_HPP_
#define CULTURESTEER_BACKEND_HPP_

#include <cstdio>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "culturesteer/model.hpp"
#include "culturesteer/probing.hpp"

namespace culturesteer {

// Line-delimited JSON request/response contract over a child process's
// standard streams; docs/formats.md pins the wire format. The in-process
// model serves the same contract natively via serve_backend, so a real-model
// adapter only has to speak the protocol.

// Serves requests from `in` until EOF or a shutdown op. Every line produces
// exactly one response line on `out`; malformed requests produce ok:false
// responses, never a crash.
void serve_backend(std::istream& in, std::ostream& out,
                   const ModelHandle& model);

// Handles one already-parsed request line; exposed for in-memory testing.
std::string backend_handle_line(const std::string& line,
                                const ModelHandle& model, bool* shutdown);

// Client end: spawns `argv` as a child process and speaks the protocol over
// its stdio. Implements OptionScorer through the letter tokens the server
// declares in its hello response.
class SubprocessBackend : public OptionScorer {
 public:
  explicit SubprocessBackend(const std::vector<std::string>& argv);
  ~SubprocessBackend() override;

  SubprocessBackend(const SubprocessBackend&) = delete;
  SubprocessBackend& operator=(const SubprocessBackend&) = delete;

  void set_interventions(InterventionSpec spec);

  const std::map<std::string, Token>& letters() const { return letters_; }
  int n_layers() const { return n_layers_; }
  int d_model() const { return d_model_; }

  std::pair<double, double> option_logits(
      const std::string& body,
      const std::optional<std::string>& system_text) override;

  std::vector<double> logits(const std::string& prompt,
                             const std::optional<std::string>& system_text);
  std::string generate(const std::string& prompt, int max_new,
                       double temperature, std::uint64_t seed);
  double perplexity(const std::string& prompt, int window, double temperature,
                    std::uint64_t seed, bool score_with_baseline = false);

 private:
  std::string roundtrip(const std::string& request_line);
  void hello();

  int pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
  std::map<std::string, Token> letters_;
  int n_layers_ = 0;
  int d_model_ = 0;
  InterventionSpec interventions_;
};

}  // namespace culturesteer

#endif  // CULTURESTEER_BACKEND_HPP_
