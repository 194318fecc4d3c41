// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Benchmark scoring, hyperparameter sweeps and dataset token statistics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracescale/scaling.hpp"

namespace tracescale {

class BenchmarkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Benchmark {
  std::vector<Problem> problems;
};

/// Reads the pool format; solutions in the file are ignored. Throws
/// BenchmarkError on duplicate ids or a problem without private tests.
Benchmark load_benchmark(const std::filesystem::path& path);
Benchmark benchmark_from_jsonl(std::string_view text);

/// Percentage of true entries in hundredths, rounded half to even.
/// Throws std::invalid_argument on an empty list.
long pass_at_1_hundredths(std::span<const bool> solved);
double pass_at_1(std::span<const bool> solved);
/// Two decimals: 7308 -> "73.08".
std::string format_hundredths(long hundredths);

struct GridPoint {
  Strategy strategy = Strategy::sequential;
  TraceRepresentation representation = TraceRepresentation::concise;
  std::size_t samples = 8;
  double temperature = 0.7;
  int rounds = 4;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

GridPoint grid_point_of(const ScalingConfig& cfg);
/// Applies the point's fields over `base`.
ScalingConfig config_at(const ScalingConfig& base, const GridPoint& point);

/// Seed for one problem at one grid point. The round budget is left out so
/// a longer run extends a shorter one with the same samples.
std::uint64_t problem_seed(std::uint64_t master, const std::string& problem_id, const GridPoint& point);

struct ProblemOutcome {
  std::string problem_id;
  bool solved = false;
  /// Outcome on the private tests, or nullopt when the run failed.
  std::optional<Outcome> private_outcome;
  std::optional<ScalingResult> result;
  std::string error;
};

struct MetricsRow {
  GridPoint point;
  long pass_at_1_hundredths = 0;
  std::size_t n_problems = 0;
  double mean_candidates = 0.0;
  /// Private-test outcomes; failed runs count under "error".
  std::map<std::string, std::size_t> outcomes;
  std::size_t errors = 0;
  /// Every problem failed to run.
  bool failed = false;
  std::vector<ProblemOutcome> problems;

  double pass_at_1() const { return static_cast<double>(pass_at_1_hundredths) / 100.0; }
};

using EvalLog = std::function<void(const std::string&)>;

struct EvalOptions {
  std::uint64_t master_seed = 0;
  /// Problems evaluated concurrently; the generators must allow it.
  std::size_t jobs = 1;
  EvalLog log;
};

/// Runs the configured strategy on each problem and scores the final
/// candidate on the private tests only. Per-problem failures are logged and
/// counted unsolved.
MetricsRow run_benchmark(Generator& gen, Generator* judge, const Benchmark& bench, const ScalingConfig& cfg,
                         const EvalOptions& options = {});

struct SweepGrid {
  std::vector<Strategy> strategies;
  std::vector<TraceRepresentation> representations;
  std::vector<std::size_t> samples;
  std::vector<double> temperatures;
  std::vector<int> rounds;

  /// Cartesian product in declaration order. Empty axes take `base`'s value.
  std::vector<GridPoint> points(const ScalingConfig& base) const;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
};

MetricsTable sweep(Generator& gen, Generator* judge, const Benchmark& bench, const SweepGrid& grid,
                   const ScalingConfig& base, const EvalOptions& options = {});

/// Header plus one tab-separated line per row.
std::string to_tsv(const MetricsTable& table);
/// One JSON object per row with the same columns.
std::string to_jsonl(const MetricsTable& table);
/// Pass@1 laid out with representations as columns.
std::string to_matrix(const MetricsTable& table);
/// Row plus per-problem detail.
nlohmann::ordered_json to_json(const MetricsRow& row);

struct TokenTotals {
  std::size_t records = 0;
  std::size_t tokens = 0;
};

struct TokenStats {
  std::map<std::string, TokenTotals> per_representation;
  /// Human-readable checks of the expected size ordering.
  std::vector<std::string> ordering_report;
  bool ordering_holds = false;
};

// Both readers list every representation, with zeros where there are no records.

/// From a records file: each line's prompt and completion tokens.
TokenStats token_stats_from_records(const std::filesystem::path& path);
/// From a build manifest's per_representation block.
TokenStats token_stats_from_manifest(const nlohmann::json& manifest);
/// Fills the ordering fields of `stats`.
void check_ordering(TokenStats& stats);
nlohmann::ordered_json to_json(const TokenStats& stats);

}  // namespace tracescale
