// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <memory>
#include <random>

#include "test_support.hpp"
#include "tracescale/dataset.hpp"
#include "tracescale/eval.hpp"
#include "tracescale/text.hpp"
#include "tracescale/tokenizer.hpp"

using namespace tracescale;

namespace {

ScriptedGenerator mock(const char* name) {
  return ScriptedGenerator(parse_script(text::read_file(testing::data_path(std::string("mock/") + name))));
}

const Benchmark& bench() {
  static const Benchmark b = load_benchmark(testing::data_path("mock_benchmark.jsonl"));
  return b;
}

long hundredths(std::size_t k, std::size_t n) {
  const auto flags = std::make_unique<bool[]>(n);
  for (std::size_t i = 0; i < k; ++i) flags[i] = true;
  return pass_at_1_hundredths(std::span<const bool>(flags.get(), n));
}

ScalingConfig seq(TraceRepresentation rep, std::size_t samples = 8, int rounds = 4) {
  ScalingConfig cfg;
  cfg.strategy = Strategy::sequential;
  cfg.representation = rep;
  cfg.samples = samples;
  cfg.max_rounds = rounds;
  return cfg;
}

class Unreachable final : public Generator {
 public:
  std::string name() const override { return "offline"; }

 protected:
  std::vector<std::string> do_generate(const GenerationRequest&) override {
    throw GeneratorError("backend offline");
  }
};

std::vector<std::string> data_lines(const std::string& tsv) {
  std::vector<std::string> out;
  for (const auto l : text::split_lines(tsv)) out.emplace_back(l);
  out.erase(out.begin());
  return out;
}

}  // namespace

TEST_CASE("pass@1 arithmetic") {
  CHECK(hundredths(26, 26) == 10000);
  CHECK(format_hundredths(hundredths(26, 26)) == "100.00");
  CHECK(format_hundredths(hundredths(19, 26)) == "73.08");
  CHECK(format_hundredths(hundredths(22, 26)) == "84.62");
  CHECK(format_hundredths(hundredths(0, 3)) == "0.00");
  CHECK(format_hundredths(hundredths(1, 3)) == "33.33");
  CHECK(format_hundredths(hundredths(2, 3)) == "66.67");
  // Exact halves round to the even neighbour.
  CHECK(hundredths(1, 32) == 312);
  CHECK(hundredths(3, 32) == 938);
  CHECK(hundredths(5, 32) == 1562);
  CHECK_THROWS_AS(hundredths(0, 0), std::invalid_argument);
  const bool all[] = {true, true};
  CHECK(pass_at_1(all) == 100.0);
}

TEST_CASE("pass@1 ignores order") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    auto flags = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) flags[i] = rng() % 2 == 0;
    const long expected = pass_at_1_hundredths(std::span<const bool>(flags.get(), n));
    std::shuffle(flags.get(), flags.get() + n, rng);
    CHECK(pass_at_1_hundredths(std::span<const bool>(flags.get(), n)) == expected);
    CHECK(expected >= 0);
    CHECK(expected <= 10000);
  }
}

TEST_CASE("benchmark loading") {
  CHECK(bench().problems.size() == 10);
  for (const auto& p : bench().problems) {
    CHECK(!p.public_tests().empty());
    CHECK(!p.private_tests().empty());
  }
  const std::string line = R"j({"problem_id":"a","description":"d","tests":[{"id":"a-1","input_spec":"f()","expected_output":"1","visibility":"private"}]})j";
  CHECK(benchmark_from_jsonl(line + "\n").problems.size() == 1);
  CHECK_THROWS_AS(benchmark_from_jsonl(line + "\n" + line + "\n"), BenchmarkError);
  const std::string pub = R"j({"problem_id":"b","description":"d","tests":[{"id":"b-1","input_spec":"f()","expected_output":"1","visibility":"public"}]})j";
  CHECK_THROWS_AS(benchmark_from_jsonl(pub), BenchmarkError);
  CHECK_THROWS_AS(benchmark_from_jsonl("{"), BenchmarkError);
  CHECK_THROWS_AS(load_benchmark(testing::data_path("missing.jsonl")), BenchmarkError);
}

TEST_CASE("run_benchmark scores private tests") {
  auto half = mock("half_solved.json");
  ScalingConfig greedy_cfg;
  greedy_cfg.strategy = Strategy::greedy;
  const auto row = run_benchmark(half, nullptr, bench(), greedy_cfg);
  CHECK(format_hundredths(row.pass_at_1_hundredths) == "50.00");
  CHECK(row.n_problems == 10);
  CHECK(row.mean_candidates == 1.0);
  CHECK(row.outcomes.at("pass") == 5);
  CHECK(row.outcomes.at("testcase_fail") == 5);
  CHECK(row.point.samples == 1);
  CHECK(row.point.temperature == 0.0);

  // A candidate that only passes the public tests is not solved; one that
  // only passes the private tests is.
  Problem p{"split", "Return 1.", {{"s-1", "f()", "1", Visibility::public_tests},
                                   {"s-2", "f()", "2", Visibility::private_tests}}};
  Benchmark b{{p}};
  Script only;
  only.rules.push_back({{"Problem: split\n"}, {}, 1, INT_MAX, {"```python\ndef f():\n    return 1\n```\n"}, std::nullopt});
  ScriptedGenerator public_only(only);
  const auto r1 = run_benchmark(public_only, nullptr, b, greedy_cfg);
  CHECK(r1.problems[0].result->solved);
  CHECK(!r1.problems[0].solved);
  only.rules[0].replies = {"```python\ndef f():\n    return 2\n```\n"};
  ScriptedGenerator private_only(only);
  const auto r2 = run_benchmark(private_only, nullptr, b, greedy_cfg);
  CHECK(!r2.problems[0].result->solved);
  CHECK(r2.problems[0].solved);
  CHECK(r2.pass_at_1_hundredths == 10000);
}

TEST_CASE("diagnostics make the difference") {
  auto gen = mock("trace_feedback.json");
  ScalingConfig greedy_cfg;
  greedy_cfg.strategy = Strategy::greedy;
  const auto g = run_benchmark(gen, nullptr, bench(), greedy_cfg);
  const auto s = run_benchmark(gen, nullptr, bench(), seq(TraceRepresentation::concise));
  CHECK(g.pass_at_1_hundredths == 0);
  CHECK(s.pass_at_1_hundredths == 10000);
  CHECK(s.pass_at_1_hundredths > g.pass_at_1_hundredths);
  CHECK(s.mean_candidates == 16.0);
  CHECK(to_json(run_benchmark(gen, nullptr, bench(), seq(TraceRepresentation::concise))).dump() ==
        to_json(s).dump());
}

TEST_CASE("per-problem failures do not abort the run") {
  Unreachable gen;
  std::vector<std::string> logged;
  EvalOptions opts;
  opts.log = [&](const std::string& m) { logged.push_back(m); };
  const auto row = run_benchmark(gen, nullptr, bench(), seq(TraceRepresentation::none), opts);
  CHECK(row.errors == 10);
  CHECK(row.failed);
  CHECK(row.pass_at_1_hundredths == 0);
  CHECK(row.outcomes.at("error") == 10);
  CHECK(logged.size() == 10);
  CHECK(text::contains(logged[0], "backend offline"));

  auto judge_missing = mock("trace_feedback.json");
  ScalingConfig par;
  par.strategy = Strategy::parallel;
  const auto p = run_benchmark(judge_missing, nullptr, bench(), par);
  CHECK(p.errors == 10);
}

TEST_CASE("sweep tables") {
  auto gen = mock("trace_feedback.json");
  SweepGrid grid;
  grid.samples = {1, 8};
  grid.representations = {TraceRepresentation::none, TraceRepresentation::concise};
  const ScalingConfig base = seq(TraceRepresentation::none);
  const auto table = sweep(gen, nullptr, bench(), grid, base);
  REQUIRE(table.rows.size() == 4);
  const auto tsv = to_tsv(table);
  CHECK(tsv.rfind("strategy\trepresentation\tsamples\ttemperature\trounds\tpass_at_1\tn_problems\tmean_candidates\n", 0) == 0);
  const auto lines = data_lines(tsv);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "sequential\tnone\t1\t0.7\t4\t0.00\t10\t4.00");
  CHECK(lines[1] == "sequential\tnone\t8\t0.7\t4\t0.00\t10\t32.00");
  CHECK(lines[2] == "sequential\tconcise\t1\t0.7\t4\t100.00\t10\t2.00");
  CHECK(lines[3] == "sequential\tconcise\t8\t0.7\t4\t100.00\t10\t16.00");

  const auto jsonl = to_jsonl(table);
  const auto first = nlohmann::json::parse(text::split_lines(jsonl)[0]);
  CHECK(first.size() == 8);
  CHECK(first.at("pass_at_1") == 0.0);
  CHECK(first.at("mean_candidates") == 4.0);

  const auto matrix = to_matrix(table);
  CHECK(matrix ==
        "setting                   none    concise\n"
        "sequential N=1 T=0.7 R=4  0.00    100.00\n"
        "sequential N=8 T=0.7 R=4  0.00    100.00\n");

  // Rows do not depend on their neighbours.
  SweepGrid smaller = grid;
  smaller.samples = {8};
  const auto lines2 = data_lines(to_tsv(sweep(gen, nullptr, bench(), smaller, base)));
  CHECK(lines2 == std::vector<std::string>{lines[1], lines[3]});
}

TEST_CASE("sweep marks failing grid points") {
  auto gen = mock("trace_feedback.json");
  SweepGrid grid;
  grid.strategies = {Strategy::greedy, Strategy::parallel};
  const auto table = sweep(gen, nullptr, bench(), grid, seq(TraceRepresentation::none));
  REQUIRE(table.rows.size() == 2);
  CHECK(!table.rows[0].failed);
  CHECK(table.rows[1].failed);
  CHECK(text::contains(to_jsonl(table), "\"failed\":true"));
  CHECK(text::contains(to_matrix(table), "failed"));
}

TEST_CASE("the samples axis raises pass@1") {
  auto gen = mock("stochastic_samples.json");
  auto base = seq(TraceRepresentation::concise, 1, 1);
  base.cache = std::make_shared<ExecutionCache>();
  SweepGrid grid;
  grid.samples = {1, 4, 8};
  grid.representations = {TraceRepresentation::none, TraceRepresentation::concise};
  std::vector<double> mean(grid.samples.size() * grid.representations.size(), 0.0);
  const int trials = 8;
  for (int t = 0; t < trials; ++t) {
    EvalOptions opts;
    opts.master_seed = static_cast<std::uint64_t>(t);
    const auto table = sweep(gen, nullptr, bench(), grid, base, opts);
    for (std::size_t i = 0; i < table.rows.size(); ++i) mean[i] += table.rows[i].pass_at_1() / trials;
  }
  for (std::size_t r = 0; r < grid.representations.size(); ++r) {
    for (std::size_t n = 1; n < grid.samples.size(); ++n) {
      const std::size_t i = r * grid.samples.size() + n;
      CHECK(mean[i] >= mean[i - 1]);
    }
  }
  CHECK(mean[2] > mean[0]);
}

TEST_CASE("the rounds axis never loses a solve") {
  auto gen = mock("stochastic_rounds.json");
  auto base = seq(TraceRepresentation::concise);
  base.cache = std::make_shared<ExecutionCache>();
  SweepGrid grid;
  grid.rounds = {1, 2, 3, 4, 5};
  for (std::uint64_t t = 0; t < 5; ++t) {
    EvalOptions opts;
    opts.master_seed = t;
    const auto table = sweep(gen, nullptr, bench(), grid, base, opts);
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      for (std::size_t p = 0; p < bench().problems.size(); ++p) {
        if (table.rows[r - 1].problems[p].solved) CHECK(table.rows[r].problems[p].solved);
      }
      CHECK(table.rows[r].pass_at_1_hundredths >= table.rows[r - 1].pass_at_1_hundredths);
    }
  }
}

TEST_CASE("seeds") {
  GridPoint a;
  GridPoint b = a;
  b.rounds = 7;
  CHECK(problem_seed(1, "x", a) == problem_seed(1, "x", b));
  b.samples = 3;
  CHECK(problem_seed(1, "x", a) != problem_seed(1, "x", b));
  CHECK(problem_seed(1, "x", a) != problem_seed(2, "x", a));
  CHECK(problem_seed(1, "x", a) != problem_seed(1, "y", a));
}

TEST_CASE("token statistics") {
  const auto dir = testing::scratch_dir("token_stats");
  text::write_file(dir / "empty.jsonl", "");
  const auto empty = token_stats_from_records(dir / "empty.jsonl");
  CHECK(empty.per_representation.size() == kAllRepresentations.size());
  for (const auto& [name, t] : empty.per_representation) {
    CHECK(t.records == 0);
    CHECK(t.tokens == 0);
  }
  CHECK(!empty.ordering_holds);

  RepairRecord r;
  r.problem_id = "p";
  r.representation = TraceRepresentation::next;
  r.prompt = "### Problem\nAdd one.\n";
  r.completion = "```python\nx = 1\n```\n";
  write_records(dir / "one.jsonl", std::vector<RepairRecord>{r});
  const auto one = token_stats_from_records(dir / "one.jsonl");
  CHECK(one.per_representation.at("next").records == 1);
  CHECK(one.per_representation.at("next").tokens == count_tokens(r.prompt) + count_tokens(r.completion));
  CHECK(one.per_representation.at("none").tokens == 0);
}

TEST_CASE("token statistics on the bundled corpus") {
  const auto pools = load_pools(testing::data_path("mini_corpus.jsonl"));
  BuildOptions options;
  const auto built = build_dataset(pools, options);
  const auto dir = testing::scratch_dir("corpus_stats");
  write_records(dir / "records.jsonl", built.records);
  const auto from_records = token_stats_from_records(dir / "records.jsonl");
  for (const auto& line : from_records.ordering_report) CAPTURE(line);
  CHECK(from_records.ordering_holds);
  const auto from_manifest = token_stats_from_manifest(nlohmann::json::parse(to_json(built.stats).dump()));
  CHECK(from_manifest.ordering_holds);
  for (const auto& [name, t] : from_records.per_representation) {
    CHECK(t.tokens == from_manifest.per_representation.at(name).tokens);
    CHECK(t.records == from_manifest.per_representation.at(name).records);
  }
  CHECK(to_json(from_records).at("ordering").size() == 4);
}
