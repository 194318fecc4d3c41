// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Candidate generators: the model side of every loop in this library.

#pragma once

#include <atomic>
#include <climits>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracescale {

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.0;
  std::size_t n = 1;
  std::uint64_t seed = 0;
};

/// Transport or protocol failure of a generator backend.
class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid backend configuration, raised before any network traffic.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Generator {
 public:
  virtual ~Generator() = default;

  /// Returns exactly `request.n` completions or throws GeneratorError.
  std::vector<std::string> generate(const GenerationRequest& request);

  virtual std::string name() const = 0;
  /// False when the backend must not be called from several threads.
  virtual bool thread_safe() const { return true; }

  std::size_t calls() const { return calls_.load(); }

 protected:
  virtual std::vector<std::string> do_generate(const GenerationRequest& request) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Scripted mock
//
// A pure function of (prompt, seed, sample index). The round of a prompt is
// 1 + the number of occurrences of `round_marker` in it, so feedback-driven
// loops can be scripted without hidden state.

struct FailureOption {
  std::string reply;
  /// Relative weight per round (index 0 = round 1); the last entry repeats.
  std::vector<double> weight_by_round{1.0};
};

struct StochasticReply {
  enum class Granularity { per_sample, per_call };
  double success_probability = 0.0;
  /// per_call: one draw decides whether sample 0 succeeds this call.
  Granularity granularity = Granularity::per_sample;
  std::string success;
  std::vector<FailureOption> failures;
};

struct ScriptRule {
  std::vector<std::string> all_of;
  std::vector<std::string> none_of;
  int min_round = 1;
  int max_round = INT_MAX;
  /// Sample i receives replies[i % replies.size()].
  std::vector<std::string> replies;
  std::optional<StochasticReply> stochastic;
};

struct Script {
  std::string round_marker = "### Feedback";
  std::vector<ScriptRule> rules;
  std::string default_reply;
};

Script parse_script(std::string_view json_text);

class ScriptedGenerator final : public Generator {
 public:
  explicit ScriptedGenerator(Script script, std::string name = "mock");

  std::string name() const override { return name_; }
  int round_of(std::string_view prompt) const;

 protected:
  std::vector<std::string> do_generate(const GenerationRequest& request) override;

 private:
  Script script_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Live backend (OpenAI-compatible chat completions)

struct LiveBackendConfig {
  std::string name;
  std::string endpoint;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env;
  double timeout_seconds = 120.0;
};

/// Resolves the key from the environment; throws ConfigError when unset.
std::unique_ptr<Generator> make_live_generator(const LiveBackendConfig& config);

}  // namespace tracescale
