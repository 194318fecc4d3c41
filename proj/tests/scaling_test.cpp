// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <tuple>

#include "test_support.hpp"
#include "tracescale/eval.hpp"
#include "tracescale/rng.hpp"
#include "tracescale/scaling.hpp"
#include "tracescale/text.hpp"

using namespace tracescale;

namespace {

ScriptedGenerator mock(const char* name) {
  return ScriptedGenerator(parse_script(text::read_file(testing::data_path(std::string("mock/") + name))));
}

const Benchmark& bench() {
  static const Benchmark b = load_benchmark(testing::data_path("mock_benchmark.jsonl"));
  return b;
}

const Problem& problem(const std::string& id) {
  for (const auto& p : bench().problems) {
    if (p.id == id) return p;
  }
  throw std::runtime_error("no problem " + id);
}

const char* kTriangle = "def triangle(n):\n    total = 0\n    for k in range(n + 1):\n        total += k\n    return total\n";
const char* kTriangleBug = "def triangle(n):\n    total = 0\n    for k in range(n):\n        total += k\n    return total\n";

std::string fenced(const std::string& code) { return "```python\n" + code + "```\n"; }

Script one_rule(std::vector<std::string> replies, std::string key = "Problem: triangle\n") {
  Script s;
  s.rules.push_back({{std::move(key)}, {}, 1, INT_MAX, std::move(replies), std::nullopt});
  return s;
}

class FailingAfter final : public Generator {
 public:
  FailingAfter(std::size_t ok_calls, std::string reply) : ok_calls_(ok_calls), reply_(std::move(reply)) {}
  std::string name() const override { return "flaky"; }

 protected:
  std::vector<std::string> do_generate(const GenerationRequest& r) override {
    if (calls() > ok_calls_) throw GeneratorError("connection reset");
    return std::vector<std::string>(r.n, reply_);
  }

 private:
  std::size_t ok_calls_;
  std::string reply_;
};

ScalingConfig sequential_cfg(TraceRepresentation rep) {
  ScalingConfig cfg;
  cfg.strategy = Strategy::sequential;
  cfg.representation = rep;
  cfg.samples = 8;
  cfg.max_rounds = 4;
  return cfg;
}

}  // namespace

TEST_CASE("strategy names and costs") {
  for (auto s : {Strategy::greedy, Strategy::cot, Strategy::sequential, Strategy::parallel}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("beam"), std::invalid_argument);
  CHECK(strategy_cost(Strategy::greedy) < strategy_cost(Strategy::cot));
  CHECK(strategy_cost(Strategy::cot) < strategy_cost(Strategy::parallel));
  CHECK(strategy_cost(Strategy::parallel) < strategy_cost(Strategy::sequential));
}

TEST_CASE("config validation") {
  ScalingConfig cfg;
  CHECK(cfg.samples == 8);
  CHECK(cfg.temperature == 0.7);
  CHECK(cfg.max_rounds == 4);
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.samples = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.max_rounds = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.prune_divisor = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.temperature = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  cfg.strategy = Strategy::greedy;
  CHECK(cfg.effective().temperature == 0.0);
  CHECK(cfg.effective().samples == 1);
  cfg.strategy = Strategy::sequential;
  CHECK(cfg.effective().samples == 8);
}

TEST_CASE("code extraction") {
  CHECK(extract_code("```python\nx = 1\n```\n", true) == "x = 1\n");
  CHECK(extract_code("first\n```python\nold = 1\n```\nthen\n```\nnew = 2\n```\n", true) == "new = 2\n");
  CHECK(extract_code("no code here", true) == std::nullopt);
  CHECK(extract_code("x = 1\n", false) == "x = 1\n");
  CHECK(extract_code("```python\nx = 1\ny = 2", true) == "x = 1\ny = 2\n");
  CHECK(extract_code("```\n```\n", true) == "");
}

TEST_CASE("judge score parsing") {
  CHECK(parse_judge_score("Looks right.\n9") == 9);
  CHECK(parse_judge_score("10\n\n  ") == 10);
  CHECK(parse_judge_score("  7  ") == 7);
  CHECK(parse_judge_score("Score: 7") == std::nullopt);
  CHECK(parse_judge_score("11") == std::nullopt);
  CHECK(parse_judge_score("0") == std::nullopt);
  CHECK(parse_judge_score("") == std::nullopt);
  CHECK(parse_judge_score("7.5") == std::nullopt);
}

TEST_CASE("prompts") {
  const auto& p = problem("triangle");
  const auto prompt = problem_prompt(p, Strategy::greedy);
  CHECK(prompt.rfind("Problem: triangle\n", 0) == 0);
  CHECK(text::contains(prompt, "Input: triangle(3)\nExpected output: 6\n"));
  CHECK(!text::contains(prompt, "triangle(10)"));
  CHECK(text::contains(problem_prompt(p, Strategy::cot), "step by step"));
}

TEST_CASE("greedy") {
  const auto& p = problem("triangle");
  ScriptedGenerator good(one_rule({fenced(kTriangle)}));
  const auto r = greedy(good, p);
  CHECK(r.solved);
  CHECK(r.candidates_explored == 1);
  CHECK(r.rounds_used == 1);
  CHECK(r.final_candidate == kTriangle);

  ScriptedGenerator garbage(one_rule({"def triangle(:"}));
  const auto g = greedy(garbage, p);
  CHECK(!g.solved);
  REQUIRE(g.per_round.size() == 1);
  CHECK(g.per_round[0].outcomes == std::map<std::string, std::size_t>{{"syntax_error", 1}});

  auto again = mock("trace_feedback.json");
  auto other = mock("trace_feedback.json");
  CHECK(to_json(greedy(again, p)).dump() == to_json(greedy(other, p)).dump());
  CHECK(!greedy(again, p).solved);
}

TEST_CASE("chain of thought") {
  const auto& p = problem("triangle");
  ScriptedGenerator good(one_rule({"Sum the numbers from 1 to n.\n" + fenced(kTriangle)}));
  CHECK(chain_of_thought(good, p).solved);

  ScriptedGenerator talk(one_rule({"Sum the numbers from 1 to n with a loop."}));
  const auto t = chain_of_thought(talk, p);
  CHECK(!t.solved);
  CHECK(t.final_outcome == Outcome::syntax_error);
  CHECK(t.per_round[0].outcomes.at("syntax_error") == 1);

  ScriptedGenerator multi(one_rule({"The code was:\n" + fenced(kTriangleBug) + "Fixed:\n" + fenced(kTriangle)}));
  CHECK(chain_of_thought(multi, p).final_candidate == kTriangle);
  ScriptedGenerator reversed(one_rule({fenced(kTriangle) + fenced(kTriangleBug)}));
  CHECK(!chain_of_thought(reversed, p).solved);
}

TEST_CASE("sequential scaling needs trace feedback to solve") {
  for (const auto& p : bench().problems) {
    CAPTURE(p.id);
    auto gen = mock("trace_feedback.json");
    const auto concise = sequential_scale(gen, p, sequential_cfg(TraceRepresentation::concise));
    CHECK(concise.solved);
    CHECK(concise.rounds_used == 2);
    CHECK(concise.candidates_explored == 16);
    REQUIRE(concise.per_round.size() == 2);
    CHECK(concise.per_round[0].outcomes.at("testcase_fail") == 8);
    REQUIRE(concise.per_round[0].diagnostics.size() == 1);
    CHECK(text::contains(concise.per_round[0].diagnostics[0], "Execution trace (concise):"));

    auto gen2 = mock("trace_feedback.json");
    const auto none = sequential_scale(gen2, p, sequential_cfg(TraceRepresentation::none));
    CHECK(!none.solved);
    CHECK(none.rounds_used == 4);
    CHECK(none.candidates_explored == 32);
    CHECK(none.final_outcome == Outcome::testcase_fail);
    for (const auto& round : none.per_round) {
      for (const auto& d : round.diagnostics) {
        CHECK(!text::contains(d, "Execution trace"));
        CHECK(text::contains(d, "Outcome: testcase_fail"));
      }
    }
    // No feedback is issued after the last round.
    CHECK(none.per_round.back().diagnostics.empty());
  }
}

TEST_CASE("sequential scaling returns at once on a first-round pass") {
  const auto& p = problem("triangle");
  ScriptedGenerator good(one_rule({fenced(kTriangleBug), fenced(kTriangle)}));
  const auto r = sequential_scale(good, p, sequential_cfg(TraceRepresentation::concise));
  CHECK(r.solved);
  CHECK(r.rounds_used == 1);
  CHECK(r.candidates_explored <= 8);
  CHECK(good.calls() == 1);
}

TEST_CASE("sequential scaling keeps the best failure") {
  const auto& p = problem("triangle");
  ScriptedGenerator gen(one_rule({"def triangle(:\n", fenced("def triangle(n):\n    return 1 / 0\n"), fenced(kTriangleBug)}));
  auto cfg = sequential_cfg(TraceRepresentation::code_executor);
  cfg.samples = 3;
  cfg.max_rounds = 2;
  const auto r = sequential_scale(gen, p, cfg);
  CHECK(!r.solved);
  CHECK(r.final_candidate == kTriangleBug);
  CHECK(r.final_outcome == Outcome::testcase_fail);
  REQUIRE(r.per_round[0].diagnostics.size() == 1);
  CHECK(r.per_round[0].diagnostics[0].rfind("Outcome: testcase_fail", 0) == 0);
  CHECK(r.candidates_explored == 6);
}

TEST_CASE("sequential scaling aborts with the rounds so far") {
  const auto& p = problem("triangle");
  FailingAfter gen(1, fenced(kTriangleBug));
  try {
    (void)sequential_scale(gen, p, sequential_cfg(TraceRepresentation::concise));
    FAIL("expected ScalingAborted");
  } catch (const ScalingAborted& e) {
    CHECK(e.partial().per_round.size() == 1);
    CHECK(e.partial().candidates_explored == 8);
    CHECK(text::contains(e.what(), "connection reset"));
  }
  FailingAfter dead(0, "");
  CHECK_THROWS_AS(greedy(dead, p), ScalingAborted);
}

TEST_CASE("sequential scaling budget and round monotonicity") {
  auto gen = mock("stochastic_rounds.json");
  auto cfg = sequential_cfg(TraceRepresentation::concise);
  cfg.cache = std::make_shared<ExecutionCache>();
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (const auto* id : {"clamp", "merge_sorted", "stdin_product"}) {
      bool solved_before = false;
      for (int rounds = 1; rounds <= 5; ++rounds) {
        cfg.seed = seed;
        cfg.max_rounds = rounds;
        const auto r = sequential_scale(gen, problem(id), cfg);
        CHECK(r.candidates_explored <= cfg.samples * static_cast<std::size_t>(rounds));
        CHECK(r.candidates_explored == cfg.samples * static_cast<std::size_t>(r.rounds_used));
        if (solved_before) CHECK(r.solved);
        solved_before = r.solved;
      }
    }
  }
  CHECK(cfg.cache->hits() > 0);
}

TEST_CASE("execution cache") {
  const auto& p = problem("triangle");
  ScriptedGenerator gen(one_rule({fenced(kTriangleBug)}));
  auto cfg = sequential_cfg(TraceRepresentation::concise);
  const auto plain = sequential_scale(gen, p, cfg);
  cfg.cache = std::make_shared<ExecutionCache>();
  const auto cached = sequential_scale(gen, p, cfg);
  CHECK(to_json(plain).dump() == to_json(cached).dump());
  CHECK(cfg.cache->size() == 1);
  // Identical samples collapse within a round, so each of the four rounds looks up once.
  CHECK(cfg.cache->hits() == 3);
}

TEST_CASE("parallel scaling picks the judged best") {
  const auto& p = problem("triangle");
  ScriptedGenerator gen(one_rule({fenced(kTriangleBug), "def triangle(:\n", fenced(kTriangle), fenced(kTriangleBug)}));
  auto judge = mock("judge.json");
  ScalingConfig cfg;
  cfg.strategy = Strategy::parallel;
  cfg.samples = 16;
  cfg.representation = TraceRepresentation::concise;
  const auto r = parallel_scale(gen, judge, p, cfg);
  CHECK(r.solved);
  CHECK(r.final_candidate == kTriangle);
  CHECK(r.rounds_used >= 1);
  std::size_t rescored = 0;
  for (std::size_t i = 1; i < r.per_round.size(); ++i) rescored += r.per_round[i].scores.size();
  CHECK(r.candidates_explored == 16 + rescored);
  CHECK(r.per_round[0].scores.size() == 16);
  REQUIRE(r.per_round[0].diagnostics.size() == 16);
  CHECK(text::contains(r.per_round[0].diagnostics[2], "Outcome: pass"));
  CHECK(text::contains(r.per_round[0].diagnostics[2], "Execution trace (concise):"));
  CHECK(text::contains(r.per_round[0].diagnostics[0], "Execution trace (concise):"));
}

TEST_CASE("parallel scaling breaks ties by candidate text") {
  const auto& p = problem("triangle");
  const std::string b = fenced("def triangle(n):\n    return 'b'\n");
  const std::string a = fenced("def triangle(n):\n    return 'a'\n");
  const std::string c = fenced("def triangle(n):\n    return 'c'\n");
  ScriptedGenerator gen(one_rule({b, c, a, b}));
  Script flat;
  flat.default_reply = "5";
  ScriptedGenerator judge(flat, "judge");
  ScalingConfig cfg;
  cfg.strategy = Strategy::parallel;
  cfg.samples = 4;
  cfg.representation = TraceRepresentation::none;
  const auto r = parallel_scale(gen, judge, p, cfg);
  CHECK(r.final_candidate == "def triangle(n):\n    return 'a'\n");
  CHECK(!r.solved);

  // Unparseable votes score the minimum, so they tie too.
  Script junk;
  junk.default_reply = "I like it";
  ScriptedGenerator junk_judge(junk, "judge");
  const auto j = parallel_scale(gen, junk_judge, p, cfg);
  CHECK(j.final_candidate == r.final_candidate);
  CHECK(j.per_round[0].scores == std::vector<int>(4, kMinJudgeScore));
}

TEST_CASE("parallel scaling stops on stable scores") {
  const auto& p = problem("triangle");
  ScriptedGenerator gen(one_rule({fenced(kTriangleBug), fenced(kTriangle)}));
  auto judge = mock("judge.json");
  ScalingConfig cfg;
  cfg.strategy = Strategy::parallel;
  cfg.samples = 6;
  cfg.prune_divisor = 1;
  cfg.representation = TraceRepresentation::none;
  const auto r = parallel_scale(gen, judge, p, cfg);
  CHECK(r.rounds_used == 2);
  CHECK(r.candidates_explored == 12);
  CHECK(r.solved);
  CHECK_THROWS_AS(run_strategy(gen, nullptr, p, cfg), std::invalid_argument);
}

TEST_CASE("compute-optimal selection") {
  CHECK(select_compute_optimal({{Strategy::sequential, 0.9}, {Strategy::parallel, 0.6}, {Strategy::greedy, 0.3}}) ==
        Strategy::sequential);
  CHECK(select_compute_optimal({{Strategy::sequential, 0.5}, {Strategy::greedy, 0.5}}) == Strategy::greedy);
  CHECK(select_compute_optimal({{Strategy::parallel, 0.5}, {Strategy::sequential, 0.5}}) == Strategy::parallel);
  CHECK_THROWS_AS(select_compute_optimal({}), std::invalid_argument);

  // Exhaustive oracle: every strategy subset, rates drawn from a coarse grid so ties are common.
  const std::vector<Strategy> all{Strategy::greedy, Strategy::cot, Strategy::sequential, Strategy::parallel};
  rng::Stream stream(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<Strategy, double> rates;
    for (auto s : all) {
      if (stream.below(4) != 0) rates[s] = static_cast<double>(stream.below(5)) / 4.0;
    }
    if (rates.empty()) continue;
    std::vector<std::tuple<double, int, Strategy>> ranked;
    for (const auto& [s, v] : rates) ranked.emplace_back(-v, strategy_cost(s), s);
    std::sort(ranked.begin(), ranked.end());
    CHECK(select_compute_optimal(rates) == std::get<2>(ranked.front()));
  }
}
