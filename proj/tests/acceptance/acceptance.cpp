// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
// and exits nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "test_support.hpp"
#include "tracescale/dataset.hpp"
#include "tracescale/eval.hpp"
#include "tracescale/generator.hpp"
#include "tracescale/scaling.hpp"
#include "tracescale/trace_adapters.hpp"
#include "tracescale/trace_capture.hpp"

using namespace tracescale;
namespace ts = tracescale::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

ScriptedGenerator mock(const std::string& script) {
  return ScriptedGenerator(parse_script(text::read_file(ts::data_path("mock/" + script))));
}

// ---------------------------------------------------------------------------

Verdict trace_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const auto programs = ts::load_json(ts::fixture("trace_oracle.json"));
  std::size_t matched = 0;
  std::string first_mismatch;
  for (const auto& p : programs) {
    RunRequest r;
    r.source = p.at("source");
    if (p.contains("stdin")) {
      r.stdin_text = p.at("stdin").get<std::string>();
    } else {
      r.invocation = p.at("invocation");
    }
    const RawTrace t = run_subject(r);
    const auto& expected = p.at("events");
    bool same = to_string(t.status.kind) == p.at("status").get<std::string>() && t.events.size() == expected.size();
    for (std::size_t i = 0; same && i < expected.size(); ++i) {
      const auto& ev = t.events[i];
      const auto want = expected[i][2].get<std::vector<std::string>>();
      same = to_string(ev.kind) == expected[i][0].get<std::string>() && ev.line == expected[i][1].get<int>() &&
             std::set<std::string>(ev.changed.begin(), ev.changed.end()) ==
                 std::set<std::string>(want.begin(), want.end());
    }
    if (same) {
      ++matched;
    } else if (first_mismatch.empty()) {
      first_mismatch = p.at("name").get<std::string>();
    }
  }
  const double elapsed = seconds_since(start);
  std::string detail = std::to_string(matched) + "/" + std::to_string(programs.size()) + " programs match, " +
                       fmt("%.1f s", elapsed);
  if (!first_mismatch.empty()) detail += ", first mismatch " + first_mismatch;
  return {programs.size() >= 30 && matched == programs.size() && elapsed < 60.0, detail};
}

Verdict bubble_sort_goldens() {
  const std::string source = text::read_file(ts::fixture("bubble_sort.py"));
  const RawTrace t = run_traced(source, "bubble_sort([64, 34, 25, 12, 22, 11, 90, 88, 45, 50])");
  const std::string full = to_code_executor(t).text;
  const std::string concise = to_concise(t).text;
  const bool full_golden = full == text::read_file(ts::fixture("bubble_sort.code_executor.golden"));
  const bool concise_golden = concise == text::read_file(ts::fixture("bubble_sort.concise.golden"));
  std::size_t full_rows = 0, full_with_n = 0, concise_rows = 0, concise_with_n = 0;
  for (const auto& row : text::split_lines(full)) {
    if (row.rfind("4:", 0) != 0) continue;
    ++full_rows;
    full_with_n += text::contains(row, "n=10");
  }
  for (const auto& row : text::split_lines(concise)) {
    if (row.rfind("4:", 0) != 0) continue;
    ++concise_rows;
    concise_with_n += text::contains(row, "n=10");
  }
  const bool pass = full_golden && concise_golden && full_rows > 0 && full_with_n == full_rows && concise_rows > 0 &&
                    concise_with_n == 0;
  return {pass, std::string("code_executor golden ") + (full_golden ? "matches" : "differs") + ", concise golden " +
                    (concise_golden ? "matches" : "differs") + "; line 4 shows n=10 in " +
                    std::to_string(full_with_n) + "/" + std::to_string(full_rows) + " full rows and " +
                    std::to_string(concise_with_n) + "/" + std::to_string(concise_rows) + " concise rows"};
}

// Both dataset criteria share these builds.
struct Builds {
  std::vector<SolutionPool> pools;
  std::string planted_problem;
  BuildResult clean;
  BuildResult decontaminated;
  double seconds = 0;
};

const Builds& builds() {
  static const Builds b = [] {
    const auto start = std::chrono::steady_clock::now();
    Builds out;
    out.pools = load_pools(ts::data_path("mini_corpus.jsonl"));
    // A benchmark whose reference solution is one of the pool's correct programs.
    out.planted_problem = "gcd";
    std::vector<std::string> benchmark;
    for (const auto& p : out.pools) {
      if (p.problem_id == out.planted_problem) benchmark.push_back(p.correct_solutions.front());
    }
    BuildOptions options;
    out.clean = build_dataset(out.pools, options);
    options.contamination_corpus = benchmark;
    out.decontaminated = build_dataset(out.pools, options);
    out.seconds = seconds_since(start);
    return out;
  }();
  return b;
}

Verdict token_ordering() {
  TokenStats stats = token_stats_from_manifest(nlohmann::json::parse(to_json(builds().clean.stats).dump()));
  std::string detail;
  for (const auto& line : stats.ordering_report) detail += (detail.empty() ? "" : "; ") + line;
  return {stats.ordering_holds, detail};
}

Verdict dataset_soundness() {
  const auto start = std::chrono::steady_clock::now();
  const Builds& b = builds();
  std::map<std::string, const SolutionPool*> by_id;
  for (const auto& p : b.pools) by_id[p.problem_id] = &p;

  // Re-verify each distinct (buggy, patch, failing tests) pair once.
  SandboxOptions sandbox;
  std::set<std::tuple<std::string, std::string, std::string, std::vector<std::string>>> seen;
  std::size_t verified = 0, failed = 0;
  for (const auto& r : b.decontaminated.records) {
    if (!seen.insert({r.problem_id, r.buggy, r.patch, r.failing_tests}).second) continue;
    const SolutionPool& pool = *by_id.at(r.problem_id);
    bool ok = !r.failing_tests.empty();
    for (const auto& id : r.failing_tests) {
      for (const auto& t : pool.tests) {
        if (t.id != id) continue;
        const std::span<const TestCase> one(&t, 1);
        ok = ok && execute_candidate(r.buggy, one, sandbox, false, TraceRepresentation::none).outcome != Outcome::pass;
      }
    }
    ok = ok && execute_candidate(r.patch, pool.tests, sandbox, false, TraceRepresentation::none).outcome == Outcome::pass;
    ok ? ++verified : ++failed;
  }

  std::size_t planted_before = 0, planted_after = 0;
  std::multiset<std::string> expected, kept;
  for (const auto& r : b.clean.records) {
    if (r.problem_id == b.planted_problem) {
      ++planted_before;
    } else {
      expected.insert(to_json(r).dump());
    }
  }
  for (const auto& r : b.decontaminated.records) {
    if (r.problem_id == b.planted_problem) ++planted_after;
    kept.insert(to_json(r).dump());
  }
  const bool recall = planted_before > 0 && planted_after == 0;
  std::size_t false_removals = 0;
  for (const auto& e : expected) false_removals += kept.count(e) == 0;
  const bool exact = false_removals == 0 && kept == expected;

  std::map<std::string, std::size_t> counts;
  for (const auto& r : b.decontaminated.records) ++counts[std::string(to_string(r.representation))];
  std::set<std::size_t> distinct;
  for (const auto& [rep, n] : counts) distinct.insert(n);
  const bool equal_counts = counts.size() == BuildOptions{}.representations.size() && distinct.size() == 1;

  const double elapsed = b.seconds + seconds_since(start);
  const bool pass = b.pools.size() >= 20 && failed == 0 && verified > 0 && recall && exact && equal_counts &&
                    elapsed < 300.0;
  std::ostringstream d;
  d << b.pools.size() << " problems, " << b.decontaminated.records.size() << " records; " << verified << "/"
    << (verified + failed) << " distinct pairs re-verify; planted records " << planted_before << " -> "
    << planted_after << ", false removals " << false_removals << "; "
    << (equal_counts ? "equal" : "unequal") << " counts across " << counts.size() << " representations ("
    << (counts.empty() ? 0 : counts.begin()->second) << " each); " << fmt("%.1f s", elapsed);
  return {pass, d.str()};
}

ScalingConfig base_config(TraceRepresentation rep, Strategy strategy) {
  ScalingConfig cfg;
  cfg.strategy = strategy;
  cfg.samples = 8;
  cfg.temperature = 0.7;
  cfg.max_rounds = 4;
  cfg.representation = rep;
  return cfg;
}

Verdict mock_differential() {
  const Benchmark bench = load_benchmark(ts::data_path("mock_benchmark.jsonl"));
  EvalOptions options;
  options.master_seed = 2026;
  auto run = [&](TraceRepresentation rep, Strategy strategy) {
    ScriptedGenerator gen = mock("trace_feedback.json");
    return run_benchmark(gen, nullptr, bench, base_config(rep, strategy), options);
  };
  const MetricsRow concise = run(TraceRepresentation::concise, Strategy::sequential);
  const MetricsRow none = run(TraceRepresentation::none, Strategy::sequential);
  const MetricsRow greedy_row = run(TraceRepresentation::concise, Strategy::greedy);
  const MetricsRow replay = run(TraceRepresentation::concise, Strategy::sequential);
  const bool identical = to_json(concise).dump() == to_json(replay).dump();
  const bool pass = bench.problems.size() == 10 && concise.pass_at_1_hundredths == 10000 &&
                    none.pass_at_1_hundredths == 0 && greedy_row.pass_at_1_hundredths == 0 && identical;
  return {pass, "sequential concise " + format_hundredths(concise.pass_at_1_hundredths) + ", sequential none " +
                    format_hundredths(none.pass_at_1_hundredths) + ", greedy " +
                    format_hundredths(greedy_row.pass_at_1_hundredths) + ", replay " +
                    (identical ? "bit-identical" : "differs")};
}

Verdict round_monotonicity() {
  constexpr int kTrials = 100;
  constexpr int kMaxRounds = 5;
  const Benchmark bench = load_benchmark(ts::data_path("mock_benchmark.jsonl"));
  ScriptedGenerator gen = mock("stochastic_rounds.json");
  ScalingConfig cfg = base_config(TraceRepresentation::concise, Strategy::sequential);
  cfg.samples = 1;
  cfg.cache = std::make_shared<ExecutionCache>();

  std::vector<std::size_t> solved(kMaxRounds + 1, 0), failures(kMaxRounds + 1, 0), syntax(kMaxRounds + 1, 0);
  for (int trial = 0; trial < kTrials; ++trial) {
    EvalOptions options;
    options.master_seed = static_cast<std::uint64_t>(trial);
    for (int rounds = 1; rounds <= kMaxRounds; ++rounds) {
      cfg.max_rounds = rounds;
      const MetricsRow row = run_benchmark(gen, nullptr, bench, cfg, options);
      for (const auto& p : row.problems) {
        if (p.solved) {
          ++solved[rounds];
          continue;
        }
        ++failures[rounds];
        syntax[rounds] += p.private_outcome == Outcome::syntax_error;
      }
    }
  }
  const double total = static_cast<double>(kTrials * bench.problems.size());
  std::vector<double> pass_curve, syntax_share;
  for (int r = 1; r <= kMaxRounds; ++r) {
    pass_curve.push_back(100.0 * static_cast<double>(solved[r]) / total);
    syntax_share.push_back(failures[r] == 0 ? 0.0 : 100.0 * static_cast<double>(syntax[r]) / failures[r]);
  }
  int violations = 0;
  for (std::size_t i = 1; i < pass_curve.size(); ++i) {
    violations += pass_curve[i] < pass_curve[i - 1];
    violations += syntax_share[i] > syntax_share[i - 1];
  }
  std::string p, s;
  for (std::size_t i = 0; i < pass_curve.size(); ++i) {
    p += (i ? " " : "") + fmt("%.2f", pass_curve[i]);
    s += (i ? " " : "") + fmt("%.2f", syntax_share[i]);
  }
  return {violations == 0, std::to_string(kTrials) + " trials; pass@1 by round " + p +
                               "; syntax_error share of failures " + s + "; " + std::to_string(violations) +
                               " violations"};
}

Verdict selector() {
  const std::vector<Strategy> all{Strategy::greedy, Strategy::cot, Strategy::parallel,
                                  Strategy::sequential};
  std::mt19937_64 rng(7);
  int agree = 0;
  constexpr int kSets = 20;
  for (int set = 0; set < kSets; ++set) {
    std::map<Strategy, double> rates;
    // Coarse rates make ties common.
    while (rates.empty()) {
      for (Strategy s : all) {
        if (rng() % 4 != 0) rates[s] = static_cast<double>(rng() % 5) * 0.25;
      }
    }
    // Exhaustive: the unique strategy that is at least as good as every other.
    std::vector<Strategy> winners;
    for (const auto& [s, rate] : rates) {
      bool dominates = true;
      for (const auto& [t, other] : rates) {
        if (t == s) continue;
        dominates = dominates && (rate > other || (rate == other && strategy_cost(s) < strategy_cost(t)));
      }
      if (dominates) winners.push_back(s);
    }
    agree += winners.size() == 1 && select_compute_optimal(rates) == winners.front();
  }
  return {agree == kSets, std::to_string(agree) + "/" + std::to_string(kSets) + " sets agree"};
}

Verdict pass_at_1_arithmetic() {
  auto score = [](int solved, int total) {
    auto bools = std::make_unique<bool[]>(total);
    for (int i = 0; i < solved; ++i) bools[i] = true;
    return format_hundredths(pass_at_1_hundredths(std::span<const bool>(bools.get(), total)));
  };
  const std::string a = score(19, 26), b = score(22, 26);
  return {a == "73.08" && b == "84.62", "19/26 -> " + a + ", 22/26 -> " + b};
}

Verdict next_round_trip() {
  struct Subject {
    std::string name;
    RunRequest request;
  };
  std::vector<Subject> subjects;
  for (const auto& p : ts::load_json(ts::fixture("trace_oracle.json"))) {
    RunRequest r;
    r.source = p.at("source");
    if (p.contains("stdin")) {
      r.stdin_text = p.at("stdin").get<std::string>();
    } else {
      r.invocation = p.at("invocation");
    }
    subjects.push_back({p.at("name"), r});
  }
  {
    RunRequest r;
    r.source = text::read_file(ts::fixture("bubble_sort.py"));
    r.invocation = "bubble_sort([64, 34, 25, 12, 22, 11, 90, 88, 45, 50])";
    subjects.push_back({"bubble_sort", r});
  }
  for (const char* input : {"-3", "0", "5", "42"}) {
    RunRequest r;
    r.source = text::read_file(ts::fixture("branchy.py"));
    r.invocation = std::string("classify(") + input + ")";
    subjects.push_back({"branchy", r});
  }
  const SandboxOptions sandbox;
  for (const auto& pool : load_pools(ts::data_path("mini_corpus.jsonl"))) {
    std::vector<std::string> programs = pool.correct_solutions;
    programs.insert(programs.end(), pool.incorrect_solutions.begin(), pool.incorrect_solutions.end());
    for (const auto& program : programs) {
      for (const auto& test : pool.tests) subjects.push_back({pool.problem_id, request_for(program, test, sandbox, true)});
    }
  }

  // Annotation needs a parseable source with at least one event.
  std::size_t stripped_ok = 0, rerun_ok = 0, outside = 0;
  std::string first_failure;
  for (const auto& s : subjects) {
    RawTrace first = run_subject(s.request);
    if (first.events.empty()) {
      ++outside;
      continue;
    }
    const std::string annotated = to_next(s.request.source, first).text;
    const std::string stripped = strip_annotations(annotated);
    const bool same_source = stripped == s.request.source;
    stripped_ok += same_source;
    RunRequest again = s.request;
    again.source = stripped;
    RawTrace second = run_subject(again);
    first.wall_time = second.wall_time = 0;
    const bool same_trace = serialize_trace(first) == serialize_trace(second);
    rerun_ok += same_trace;
    if ((!same_source || !same_trace) && first_failure.empty()) first_failure = s.name;
  }
  const std::size_t checked = subjects.size() - outside;
  std::string detail = std::to_string(stripped_ok) + "/" + std::to_string(checked) +
                       " sources restored byte-for-byte, " + std::to_string(rerun_ok) + "/" + std::to_string(checked) +
                       " re-executions identical, " + std::to_string(outside) + " runs without events skipped";
  if (!first_failure.empty()) detail += ", first failure " + first_failure;
  return {checked > 0 && stripped_ok == checked && rerun_ok == checked, detail};
}

}  // namespace

// Optional arguments pick criteria by number; none runs them all.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"trace oracle equivalence", trace_oracle},
      {"bubble_sort golden renderings", bubble_sort_goldens},
      {"representation size ordering", token_ordering},
      {"dataset pipeline soundness", dataset_soundness},
      {"scaling mock differential", mock_differential},
      {"round monotonicity", round_monotonicity},
      {"compute-optimal selector", selector},
      {"pass@1 arithmetic", pass_at_1_arithmetic},
      {"NExT round trip", next_round_trip},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  int failed = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.contains(i + 1)) continue;
    ++ran;
    const auto& [name, check] = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %zu %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", i + 1, name.c_str(), v.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
