// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Test-time scaling strategies over a candidate generator.
//
// Every strategy verifies candidates against the problem's public tests only;
// callers score the final candidate on private tests themselves.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tracescale/generator.hpp"
#include "tracescale/sandbox.hpp"

namespace tracescale {

enum class Strategy { greedy, cot, sequential, parallel };

std::string_view to_string(Strategy s);
/// Throws std::invalid_argument for unknown names.
Strategy parse_strategy(std::string_view name);

/// Position in the cost order used to break solve-rate ties; lower is cheaper.
int strategy_cost(Strategy s);

struct Problem {
  std::string id;
  std::string prompt;
  std::vector<TestCase> tests;

  std::vector<TestCase> public_tests() const { return with_visibility(tests, Visibility::public_tests); }
  std::vector<TestCase> private_tests() const { return with_visibility(tests, Visibility::private_tests); }
};

/// Reports of already-executed (candidate, tests, representation) triples.
/// Execution is deterministic for programs that finish well inside their
/// limits, so repeated candidates can skip the sandbox. Thread-safe.
class ExecutionCache {
 public:
  std::optional<ExecutionReport> find(const std::string& key) const;
  void insert(const std::string& key, const ExecutionReport& report);
  std::size_t size() const;
  std::size_t hits() const;

 private:
  mutable std::mutex mu_;
  mutable std::size_t hits_ = 0;
  std::unordered_map<std::string, ExecutionReport> reports_;
};

struct ScalingConfig {
  Strategy strategy = Strategy::sequential;
  std::size_t samples = 8;
  double temperature = 0.7;
  int max_rounds = 4;
  std::size_t prune_divisor = 2;
  TraceRepresentation representation = TraceRepresentation::concise;
  std::uint64_t seed = 0;
  /// Concurrent candidate executions and judge calls within a round.
  std::size_t jobs = 1;
  SandboxOptions sandbox;
  /// Optional; shared across runs. The final re-verification never uses it.
  std::shared_ptr<ExecutionCache> cache;

  /// Throws std::invalid_argument on a zero sample count, round budget or
  /// divisor, or a temperature outside [0, 2].
  void validate() const;
  /// Greedy and CoT decode one candidate at temperature 0.
  ScalingConfig effective() const;
};

nlohmann::ordered_json to_json(const ScalingConfig& cfg);

struct RoundLog {
  int round = 0;
  std::map<std::string, std::size_t> outcomes;
  std::vector<std::string> diagnostics;
  /// Judge scores of the candidates still in play (parallel only).
  std::vector<int> scores;
};

struct ScalingResult {
  std::string problem_id;
  Strategy strategy = Strategy::greedy;
  std::string final_candidate;
  Outcome final_outcome = Outcome::syntax_error;
  bool solved = false;
  int rounds_used = 0;
  std::size_t candidates_explored = 0;
  std::vector<RoundLog> per_round;
};

nlohmann::ordered_json to_json(const ScalingResult& r);

/// A generator failed mid-run. `partial` holds every completed round.
class ScalingAborted : public GeneratorError {
 public:
  ScalingAborted(const std::string& what, ScalingResult partial)
      : GeneratorError(what), partial_(std::move(partial)) {}
  const ScalingResult& partial() const { return partial_; }

 private:
  ScalingResult partial_;
};

/// Body of the last ```-fenced block. Without a fence, the whole completion
/// when `require_fence` is false and nullopt otherwise.
std::optional<std::string> extract_code(std::string_view completion, bool require_fence);

/// Task prompt; carries a "Problem: <id>" line and the public examples.
std::string problem_prompt(const Problem& problem, Strategy strategy);

/// Integer 1..10 on the last non-blank line, or nullopt.
std::optional<int> parse_judge_score(std::string_view reply);
inline constexpr int kMinJudgeScore = 1;

ScalingResult greedy(Generator& gen, const Problem& problem, const ScalingConfig& cfg = {});
ScalingResult chain_of_thought(Generator& gen, const Problem& problem, const ScalingConfig& cfg = {});
ScalingResult sequential_scale(Generator& gen, const Problem& problem, const ScalingConfig& cfg);
ScalingResult parallel_scale(Generator& gen, Generator& judge, const Problem& problem, const ScalingConfig& cfg);

/// Dispatches on cfg.strategy. Parallel scaling needs a judge.
ScalingResult run_strategy(Generator& gen, Generator* judge, const Problem& problem, const ScalingConfig& cfg);

/// Highest solve rate; ties go to the cheaper strategy. Throws
/// std::invalid_argument when `rates` is empty.
Strategy select_compute_optimal(const std::map<Strategy, double>& rates);

}  // namespace tracescale
