// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <set>

#include "tracescale/parallel.hpp"
#include "tracescale/rng.hpp"
#include "tracescale/text.hpp"
#include "tracescale/tokenizer.hpp"

namespace tracescale {

Benchmark benchmark_from_jsonl(std::string_view body) {
  Benchmark bench;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto line : text::split_lines(body)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    Problem p;
    try {
      const auto j = nlohmann::json::parse(line);
      p.id = j.at("problem_id").get<std::string>();
      p.prompt = j.at("description").get<std::string>();
      for (const auto& t : j.at("tests")) p.tests.push_back(test_case_from_json(t));
    } catch (const std::exception& e) {
      throw BenchmarkError("benchmark line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(p.id).second) throw BenchmarkError("duplicate problem id: " + p.id);
    if (p.private_tests().empty()) throw BenchmarkError("problem " + p.id + " has no private tests");
    bench.problems.push_back(std::move(p));
  }
  return bench;
}

Benchmark load_benchmark(const std::filesystem::path& path) {
  std::string body;
  try {
    body = text::read_file(path);
  } catch (const std::exception& e) {
    throw BenchmarkError(e.what());
  }
  return benchmark_from_jsonl(body);
}

long pass_at_1_hundredths(std::span<const bool> solved) {
  if (solved.empty()) throw std::invalid_argument("pass@1 of an empty outcome list");
  long k = 0;
  for (bool s : solved) k += s ? 1 : 0;
  const long n = static_cast<long>(solved.size());
  const long scaled = k * 10000;
  long q = scaled / n;
  const long r = scaled % n;
  if (2 * r > n || (2 * r == n && q % 2 == 1)) ++q;
  return q;
}

double pass_at_1(std::span<const bool> solved) { return static_cast<double>(pass_at_1_hundredths(solved)) / 100.0; }

std::string format_hundredths(long hundredths) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%ld.%02ld", hundredths / 100, hundredths % 100);
  return buf;
}

GridPoint grid_point_of(const ScalingConfig& cfg) {
  return {cfg.strategy, cfg.representation, cfg.samples, cfg.temperature, cfg.max_rounds};
}

ScalingConfig config_at(const ScalingConfig& base, const GridPoint& point) {
  ScalingConfig cfg = base;
  cfg.strategy = point.strategy;
  cfg.representation = point.representation;
  cfg.samples = point.samples;
  cfg.temperature = point.temperature;
  cfg.max_rounds = point.rounds;
  return cfg;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string format_mean(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::uint64_t problem_seed(std::uint64_t master, const std::string& problem_id, const GridPoint& point) {
  const std::string key = std::string(to_string(point.strategy)) + "/" + std::string(to_string(point.representation)) +
                          "/" + std::to_string(point.samples) + "/" + format_double(point.temperature);
  return rng::derive({master, rng::fnv1a(problem_id), rng::fnv1a(key)});
}

MetricsRow run_benchmark(Generator& gen, Generator* judge, const Benchmark& bench, const ScalingConfig& cfg,
                         const EvalOptions& options) {
  cfg.validate();
  MetricsRow row;
  row.point = grid_point_of(cfg.strategy == Strategy::greedy || cfg.strategy == Strategy::cot ? cfg.effective() : cfg);
  row.n_problems = bench.problems.size();
  row.problems.resize(bench.problems.size());
  const bool concurrent = gen.thread_safe() && (judge == nullptr || judge->thread_safe());

  parallel_for(bench.problems.size(), concurrent ? options.jobs : 1, [&](std::size_t i) {
    const Problem& problem = bench.problems[i];
    ProblemOutcome& out = row.problems[i];
    out.problem_id = problem.id;
    ScalingConfig local = cfg;
    local.seed = problem_seed(options.master_seed, problem.id, grid_point_of(cfg));
    try {
      out.result = run_strategy(gen, judge, problem, local);
      const auto& candidate = out.result->final_candidate;
      if (candidate.empty() && out.result->final_outcome == Outcome::syntax_error) {
        out.private_outcome = Outcome::syntax_error;
      } else {
        const auto report =
            execute_candidate(candidate, problem.private_tests(), cfg.sandbox, false, TraceRepresentation::none);
        out.private_outcome = report.outcome;
      }
      out.solved = out.private_outcome == Outcome::pass;
    } catch (const ScalingAborted& e) {
      out.result = e.partial();
      out.error = e.what();
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    if (!out.error.empty() && options.log) options.log(problem.id + ": " + out.error);
  });

  const auto solved_flags = std::make_unique<bool[]>(row.problems.size());
  std::size_t candidates = 0;
  for (std::size_t i = 0; i < row.problems.size(); ++i) {
    const auto& p = row.problems[i];
    solved_flags[i] = p.solved;
    if (p.result) candidates += p.result->candidates_explored;
    if (p.private_outcome) {
      ++row.outcomes[std::string(to_string(*p.private_outcome))];
    } else {
      ++row.outcomes["error"];
      ++row.errors;
    }
  }
  if (!row.problems.empty()) {
    row.pass_at_1_hundredths = pass_at_1_hundredths(std::span<const bool>(solved_flags.get(), row.problems.size()));
    row.mean_candidates = static_cast<double>(candidates) / static_cast<double>(row.n_problems);
  }
  row.failed = row.n_problems > 0 && row.errors == row.n_problems;
  return row;
}

std::vector<GridPoint> SweepGrid::points(const ScalingConfig& base) const {
  const auto pick = [](const auto& axis, auto fallback) {
    using T = typename std::decay_t<decltype(axis)>::value_type;
    return axis.empty() ? std::vector<T>{static_cast<T>(fallback)} : axis;
  };
  std::vector<GridPoint> out;
  for (auto s : pick(strategies, base.strategy)) {
    for (auto r : pick(representations, base.representation)) {
      for (auto n : pick(samples, base.samples)) {
        for (auto t : pick(temperatures, base.temperature)) {
          for (auto k : pick(rounds, base.max_rounds)) out.push_back({s, r, n, t, k});
        }
      }
    }
  }
  return out;
}

MetricsTable sweep(Generator& gen, Generator* judge, const Benchmark& bench, const SweepGrid& grid,
                   const ScalingConfig& base, const EvalOptions& options) {
  MetricsTable table;
  for (const auto& point : grid.points(base)) {
    const ScalingConfig cfg = config_at(base, point);
    try {
      table.rows.push_back(run_benchmark(gen, judge, bench, cfg, options));
    } catch (const std::exception& e) {
      MetricsRow row;
      row.point = point;
      row.n_problems = bench.problems.size();
      row.failed = true;
      row.errors = row.n_problems;
      row.outcomes["error"] = row.n_problems;
      if (options.log) options.log("grid point failed: " + std::string(e.what()));
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

namespace {

const char* kColumns[] = {"strategy", "representation", "samples", "temperature", "rounds",
                          "pass_at_1", "n_problems", "mean_candidates"};

std::vector<std::string> row_cells(const MetricsRow& row) {
  return {std::string(to_string(row.point.strategy)),
          std::string(to_string(row.point.representation)),
          std::to_string(row.point.samples),
          format_double(row.point.temperature),
          std::to_string(row.point.rounds),
          format_hundredths(row.pass_at_1_hundredths),
          std::to_string(row.n_problems),
          format_mean(row.mean_candidates)};
}

}  // namespace

std::string to_tsv(const MetricsTable& table) {
  std::vector<std::string> header(std::begin(kColumns), std::end(kColumns));
  std::string out = text::join(header, "\t") + "\n";
  for (const auto& row : table.rows) out += text::join(row_cells(row), "\t") + "\n";
  return out;
}

std::string to_jsonl(const MetricsTable& table) {
  std::string out;
  for (const auto& row : table.rows) {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(row.point.strategy);
    j["representation"] = to_string(row.point.representation);
    j["samples"] = row.point.samples;
    j["temperature"] = row.point.temperature;
    j["rounds"] = row.point.rounds;
    j["pass_at_1"] = row.pass_at_1();
    j["n_problems"] = row.n_problems;
    j["mean_candidates"] = std::stod(format_mean(row.mean_candidates));
    if (row.failed) j["failed"] = true;
    out += j.dump() + "\n";
  }
  return out;
}

std::string to_matrix(const MetricsTable& table) {
  std::vector<std::string> reps;
  std::vector<std::string> settings;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  for (const auto& row : table.rows) {
    const std::string rep(to_string(row.point.representation));
    const std::string setting = std::string(to_string(row.point.strategy)) + " N=" +
                                std::to_string(row.point.samples) + " T=" + format_double(row.point.temperature) +
                                " R=" + std::to_string(row.point.rounds);
    if (std::find(reps.begin(), reps.end(), rep) == reps.end()) reps.push_back(rep);
    if (std::find(settings.begin(), settings.end(), setting) == settings.end()) settings.push_back(setting);
    cells[{setting, rep}] = row.failed ? "failed" : format_hundredths(row.pass_at_1_hundredths);
  }
  std::size_t first = std::string("setting").size();
  for (const auto& s : settings) first = std::max(first, s.size());
  std::vector<std::size_t> widths;
  for (const auto& r : reps) widths.push_back(std::max<std::size_t>(r.size(), 6));

  const auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string out = pad("setting", first);
  for (std::size_t c = 0; c < reps.size(); ++c) out += "  " + pad(reps[c], widths[c]);
  out += "\n";
  for (const auto& s : settings) {
    std::string line = pad(s, first);
    for (std::size_t c = 0; c < reps.size(); ++c) {
      const auto it = cells.find({s, reps[c]});
      line += "  " + pad(it == cells.end() ? "-" : it->second, widths[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

nlohmann::ordered_json to_json(const MetricsRow& row) {
  nlohmann::ordered_json outcomes = nlohmann::ordered_json::object();
  for (const auto& [k, v] : row.outcomes) outcomes[k] = v;
  nlohmann::ordered_json problems = nlohmann::ordered_json::array();
  for (const auto& p : row.problems) {
    nlohmann::ordered_json j{{"problem_id", p.problem_id}, {"solved", p.solved}};
    j["private_outcome"] = p.private_outcome ? nlohmann::ordered_json(to_string(*p.private_outcome))
                                             : nlohmann::ordered_json(nullptr);
    if (!p.error.empty()) j["error"] = p.error;
    if (p.result) j["result"] = to_json(*p.result);
    problems.push_back(std::move(j));
  }
  return {{"strategy", to_string(row.point.strategy)},
          {"representation", to_string(row.point.representation)},
          {"samples", row.point.samples},
          {"temperature", row.point.temperature},
          {"rounds", row.point.rounds},
          {"pass_at_1", row.pass_at_1()},
          {"n_problems", row.n_problems},
          {"mean_candidates", row.mean_candidates},
          {"outcomes", outcomes},
          {"failed", row.failed},
          {"problems", problems}};
}

namespace {

TokenStats zeroed() {
  TokenStats stats;
  for (auto rep : kAllRepresentations) stats.per_representation[std::string(to_string(rep))];
  return stats;
}

}  // namespace

TokenStats token_stats_from_records(const std::filesystem::path& path) {
  TokenStats stats = zeroed();
  const std::string body = text::read_file(path);
  std::size_t line_no = 0;
  for (const auto line : text::split_lines(body)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto& t = stats.per_representation[j.at("representation").get<std::string>()];
    ++t.records;
    t.tokens += count_tokens(j.at("prompt").get<std::string>()) + count_tokens(j.at("completion").get<std::string>());
  }
  check_ordering(stats);
  return stats;
}

TokenStats token_stats_from_manifest(const nlohmann::json& manifest) {
  TokenStats stats = zeroed();
  const nlohmann::json* block = &manifest;
  if (manifest.contains("stats")) block = &manifest.at("stats");
  if (block->contains("per_representation")) {
    for (const auto& [name, r] : block->at("per_representation").items()) {
      stats.per_representation[name] = {r.at("records").get<std::size_t>(), r.at("total_tokens").get<std::size_t>()};
    }
  }
  check_ordering(stats);
  return stats;
}

void check_ordering(TokenStats& stats) {
  stats.ordering_report.clear();
  stats.ordering_holds = true;
  const auto total = [&](const char* rep) -> std::optional<std::size_t> {
    const auto it = stats.per_representation.find(rep);
    if (it == stats.per_representation.end()) return std::nullopt;
    return it->second.tokens;
  };
  const auto check = [&](const char* a, const char* op, const char* b, bool strict) {
    const auto x = total(a);
    const auto y = total(b);
    std::string line = std::string(a) + " " + op + " " + b + ": ";
    if (!x || !y) {
      line += "skipped (missing representation)";
      stats.ordering_holds = false;
    } else {
      const bool ok = strict ? *x < *y : *x <= *y;
      line += (ok ? "ok (" : "violated (") + std::to_string(*x) + " vs " + std::to_string(*y) + ")";
      stats.ordering_holds = stats.ordering_holds && ok;
    }
    stats.ordering_report.push_back(std::move(line));
  };
  check("none", "<", "next", true);
  check("next", "<", "code_executor", true);
  check("concise", "<=", "code_executor", false);
  check("code_executor", "<", "semcoder_template", true);
}

nlohmann::ordered_json to_json(const TokenStats& stats) {
  nlohmann::ordered_json reps = nlohmann::ordered_json::object();
  for (const auto& [name, t] : stats.per_representation) reps[name] = {{"records", t.records}, {"tokens", t.tokens}};
  return {{"per_representation", reps}, {"ordering", stats.ordering_report}, {"ordering_holds", stats.ordering_holds}};
}

}  // namespace tracescale
