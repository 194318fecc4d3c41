// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/scaling.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include "tracescale/parallel.hpp"
#include "tracescale/rng.hpp"
#include "tracescale/text.hpp"
#include "tracescale/tokenizer.hpp"

namespace tracescale {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::cot: return "cot";
    case Strategy::sequential: return "sequential";
    case Strategy::parallel: return "parallel";
  }
  return "greedy";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::greedy;
  if (name == "cot") return Strategy::cot;
  if (name == "sequential") return Strategy::sequential;
  if (name == "parallel") return Strategy::parallel;
  throw std::invalid_argument("unknown strategy: " + std::string(name));
}

int strategy_cost(Strategy s) {
  switch (s) {
    case Strategy::greedy: return 0;
    case Strategy::cot: return 1;
    case Strategy::parallel: return 2;
    case Strategy::sequential: return 3;
  }
  return 3;
}

void ScalingConfig::validate() const {
  if (samples == 0) throw std::invalid_argument("samples must be at least 1");
  if (max_rounds < 1) throw std::invalid_argument("rounds must be at least 1");
  if (prune_divisor == 0) throw std::invalid_argument("prune divisor must be at least 1");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw std::invalid_argument("temperature must lie in [0, 2]");
}

ScalingConfig ScalingConfig::effective() const {
  ScalingConfig c = *this;
  if (strategy == Strategy::greedy || strategy == Strategy::cot) {
    c.temperature = 0.0;
    c.samples = 1;
  }
  return c;
}

std::optional<ExecutionReport> ExecutionCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  const auto it = reports_.find(key);
  if (it == reports_.end()) return std::nullopt;
  ++hits_;
  return it->second;
}

void ExecutionCache::insert(const std::string& key, const ExecutionReport& report) {
  std::lock_guard lock(mu_);
  reports_.emplace(key, report);
}

std::size_t ExecutionCache::size() const {
  std::lock_guard lock(mu_);
  return reports_.size();
}

std::size_t ExecutionCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

nlohmann::ordered_json to_json(const ScalingConfig& cfg) {
  return {{"strategy", to_string(cfg.strategy)},
          {"samples", cfg.samples},
          {"temperature", cfg.temperature},
          {"rounds", cfg.max_rounds},
          {"prune_divisor", cfg.prune_divisor},
          {"representation", to_string(cfg.representation)},
          {"seed", cfg.seed},
          {"jobs", cfg.jobs},
          {"max_steps", cfg.sandbox.limits.max_steps},
          {"max_wall_time", cfg.sandbox.limits.max_wall_time},
          {"memory_limit_bytes", cfg.sandbox.memory_limit_bytes},
          {"diagnostic_token_budget", cfg.sandbox.diagnostic_token_budget}};
}

nlohmann::ordered_json to_json(const ScalingResult& r) {
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const auto& log : r.per_round) {
    nlohmann::ordered_json outcomes = nlohmann::ordered_json::object();
    for (const auto& [k, v] : log.outcomes) outcomes[k] = v;
    nlohmann::ordered_json entry{{"round", log.round}, {"outcomes", outcomes}, {"diagnostics", log.diagnostics}};
    if (!log.scores.empty()) entry["scores"] = log.scores;
    rounds.push_back(std::move(entry));
  }
  return {{"problem_id", r.problem_id},
          {"strategy", to_string(r.strategy)},
          {"solved", r.solved},
          {"final_outcome", to_string(r.final_outcome)},
          {"rounds_used", r.rounds_used},
          {"candidates_explored", r.candidates_explored},
          {"final_candidate", r.final_candidate},
          {"per_round", rounds}};
}

std::optional<std::string> extract_code(std::string_view completion, bool require_fence) {
  std::optional<std::string> last;
  std::optional<std::string> open;
  for (const auto line : text::split_lines(completion)) {
    const std::string trimmed = text::collapse_whitespace(line);
    if (!open) {
      if (trimmed.rfind("```", 0) == 0) open.emplace();
    } else if (trimmed == "```") {
      last = std::move(*open);
      open.reset();
    } else {
      *open += std::string(line) + "\n";
    }
  }
  // An unterminated final block still counts.
  if (open) last = std::move(*open);
  if (last) return last;
  if (require_fence) return std::nullopt;
  return std::string(completion);
}

std::string problem_prompt(const Problem& problem, Strategy strategy) {
  std::string out = "Problem: " + problem.id + "\n\n" + problem.prompt + "\n";
  const auto examples = problem.public_tests();
  if (!examples.empty()) {
    out += "\n### Examples\n";
    for (const auto& t : examples) {
      out += "Input: " + t.input_spec + "\nExpected output: " + t.expected_output + "\n";
    }
  }
  out += "\n";
  if (strategy == Strategy::cot) {
    out += "Reason step by step about how to solve the problem, then give the final program in a ```python block.\n";
  } else {
    out += "Write a Python program that solves the problem. Answer with the code in a ```python block.\n";
  }
  return out;
}

std::optional<int> parse_judge_score(std::string_view reply) {
  const auto lines = text::split_lines(reply);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string line = text::collapse_whitespace(*it);
    if (line.empty()) continue;
    int value = 0;
    const auto [end, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
    if (ec != std::errc() || end != line.data() + line.size()) return std::nullopt;
    if (value < 1 || value > 10) return std::nullopt;
    return value;
  }
  return std::nullopt;
}

namespace {

struct Evaluated {
  std::string code;
  ExecutionReport report;
};

Evaluated evaluate(std::string_view completion, bool require_fence, const std::vector<TestCase>& tests,
                   const ScalingConfig& cfg) {
  Evaluated e;
  const auto code = extract_code(completion, require_fence);
  if (!code) {
    e.report.outcome = Outcome::syntax_error;
    e.report.error_detail = "no fenced code block in the completion";
    e.report.diagnostic = make_diagnostic(e.report, TraceRepresentation::none, cfg.sandbox.diagnostic_token_budget);
    return e;
  }
  e.code = *code;
  std::string key;
  if (cfg.cache) {
    key = std::string(to_string(cfg.representation)) + '\x1f' + std::to_string(cfg.sandbox.diagnostic_token_budget);
    for (const auto& t : tests) key += '\x1f' + t.id + '\x1e' + t.input_spec + '\x1e' + t.expected_output;
    key += '\x1d' + e.code;
    if (auto hit = cfg.cache->find(key)) {
      e.report = std::move(*hit);
      return e;
    }
  }
  e.report = execute_candidate(e.code, tests, cfg.sandbox, cfg.representation != TraceRepresentation::none,
                               cfg.representation);
  if (cfg.cache) cfg.cache->insert(key, e.report);
  return e;
}

std::vector<Evaluated> evaluate_all(const std::vector<std::string>& completions, bool require_fence,
                                    const std::vector<TestCase>& tests, const ScalingConfig& cfg) {
  // Identical samples are common at low temperature; each distinct text runs once.
  std::vector<std::size_t> first_of(completions.size());
  std::vector<std::size_t> distinct;
  std::map<std::string_view, std::size_t> seen;
  for (std::size_t i = 0; i < completions.size(); ++i) {
    const auto [it, fresh] = seen.emplace(completions[i], i);
    first_of[i] = it->second;
    if (fresh) distinct.push_back(i);
  }
  std::vector<Evaluated> out(completions.size());
  parallel_for(distinct.size(), cfg.jobs, [&](std::size_t k) {
    out[distinct[k]] = evaluate(completions[distinct[k]], require_fence, tests, cfg);
  });
  for (std::size_t i = 0; i < completions.size(); ++i) {
    if (first_of[i] != i) out[i] = out[first_of[i]];
  }
  return out;
}

std::vector<TestCase> require_public(const Problem& problem) {
  auto tests = problem.public_tests();
  if (tests.empty()) throw std::invalid_argument("problem " + problem.id + " has no public tests");
  return tests;
}

std::uint64_t round_seed(const ScalingConfig& cfg, const Problem& problem, std::uint64_t round) {
  return rng::derive({cfg.seed, rng::fnv1a(problem.id), round});
}

RoundLog log_round(int round, const std::vector<Evaluated>& evaluated) {
  RoundLog log;
  log.round = round;
  for (const auto& e : evaluated) ++log.outcomes[std::string(to_string(e.report.outcome))];
  return log;
}

// An independent re-run, so a pass never rests on the strategy's own bookkeeping.
void finish(ScalingResult& result, const Evaluated& chosen, const std::vector<TestCase>& tests,
            const ScalingConfig& cfg) {
  result.final_candidate = chosen.code;
  if (chosen.code.empty() && chosen.report.outcome == Outcome::syntax_error) {
    result.final_outcome = Outcome::syntax_error;
    result.solved = false;
    return;
  }
  const auto check = execute_candidate(chosen.code, tests, cfg.sandbox, false, TraceRepresentation::none);
  result.final_outcome = check.outcome;
  result.solved = check.outcome == Outcome::pass;
}

std::vector<std::string> generate_or_abort(Generator& gen, const GenerationRequest& request,
                                           const ScalingResult& partial) {
  try {
    return gen.generate(request);
  } catch (const GeneratorError& e) {
    throw ScalingAborted(std::string(gen.name()) + ": " + e.what(), partial);
  }
}

ScalingResult single_shot(Generator& gen, const Problem& problem, const ScalingConfig& given, Strategy strategy) {
  ScalingConfig cfg = given;
  cfg.strategy = strategy;
  cfg = cfg.effective();
  cfg.validate();
  const auto tests = require_public(problem);
  ScalingResult result;
  result.problem_id = problem.id;
  result.strategy = strategy;
  const auto completions =
      generate_or_abort(gen, {problem_prompt(problem, strategy), 0.0, 1, round_seed(cfg, problem, 1)}, result);
  const auto evaluated = evaluate_all(completions, strategy == Strategy::cot, tests, cfg);
  result.per_round.push_back(log_round(1, evaluated));
  result.rounds_used = 1;
  result.candidates_explored = 1;
  finish(result, evaluated.front(), tests, cfg);
  return result;
}

std::string feedback_block(int round, const Evaluated& failed) {
  std::string out = "\n### Feedback (round " + std::to_string(round) + ")\nPrevious attempt:\n```python\n" +
                    failed.code;
  if (!failed.code.empty() && failed.code.back() != '\n') out += '\n';
  out += "```\n" + failed.report.diagnostic;
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += "Revise the program so that it passes the failing test. Answer with the code in a ```python block.\n";
  return out;
}

// Index of the highest-ranked candidate; the earliest wins ties.
std::size_t best_index(const std::vector<Evaluated>& evaluated) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < evaluated.size(); ++i) {
    if (outcome_rank(evaluated[i].report.outcome) > outcome_rank(evaluated[best].report.outcome)) best = i;
  }
  return best;
}

std::string execution_summary(const Evaluated& e, const std::vector<TestCase>& tests, const ScalingConfig& cfg) {
  if (e.report.outcome != Outcome::pass) return e.report.diagnostic;
  std::string out = "Outcome: pass\nPassed all " + std::to_string(tests.size()) + " public tests.\n";
  if (cfg.representation != TraceRepresentation::none) {
    const RawTrace run = run_subject(request_for(e.code, tests.front(), cfg.sandbox, true));
    if (!run.events.empty()) {
      const auto rendered = render_trace(cfg.representation, e.code, run, cfg.sandbox.semcoder_generator);
      out += trace_heading(cfg.representation) + "\n" + rendered.text + "\n";
    }
  }
  return truncate_to_tokens(out, cfg.sandbox.diagnostic_token_budget);
}

std::string scoring_prompt(const Problem& problem, const Evaluated& e, const std::string& summary,
                           std::size_t remaining) {
  std::string out = "Problem: " + problem.id + "\n\n" + problem.prompt + "\n\n### Candidate\n```python\n" + e.code;
  if (!e.code.empty() && e.code.back() != '\n') out += '\n';
  out += "```\n\n### Execution result\n" + summary;
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += "\nCandidates remaining: " + std::to_string(remaining) +
         "\nRate how likely the candidate is to be correct on unseen tests, from 1 to 10. "
         "Write the score alone on the last line.\n";
  return out;
}

}  // namespace

ScalingResult greedy(Generator& gen, const Problem& problem, const ScalingConfig& cfg) {
  return single_shot(gen, problem, cfg, Strategy::greedy);
}

ScalingResult chain_of_thought(Generator& gen, const Problem& problem, const ScalingConfig& cfg) {
  return single_shot(gen, problem, cfg, Strategy::cot);
}

ScalingResult sequential_scale(Generator& gen, const Problem& problem, const ScalingConfig& cfg) {
  if (cfg.strategy != Strategy::sequential) throw std::invalid_argument("sequential_scale: strategy is not sequential");
  cfg.validate();
  const auto tests = require_public(problem);
  ScalingResult result;
  result.problem_id = problem.id;
  result.strategy = Strategy::sequential;
  std::string prompt = problem_prompt(problem, Strategy::sequential);
  std::optional<Evaluated> best;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    const auto completions = generate_or_abort(
        gen, {prompt, cfg.temperature, cfg.samples, round_seed(cfg, problem, static_cast<std::uint64_t>(round))},
        result);
    auto evaluated = evaluate_all(completions, false, tests, cfg);
    result.per_round.push_back(log_round(round, evaluated));
    result.rounds_used = round;
    result.candidates_explored += evaluated.size();

    const std::size_t top = best_index(evaluated);
    if (!best || outcome_rank(evaluated[top].report.outcome) > outcome_rank(best->report.outcome)) {
      best = evaluated[top];
    }
    if (evaluated[top].report.outcome == Outcome::pass) break;
    if (round < cfg.max_rounds) {
      result.per_round.back().diagnostics.push_back(evaluated[top].report.diagnostic);
      prompt += feedback_block(round, evaluated[top]);
    }
  }
  finish(result, *best, tests, cfg);
  return result;
}

ScalingResult parallel_scale(Generator& gen, Generator& judge, const Problem& problem, const ScalingConfig& cfg) {
  if (cfg.strategy != Strategy::parallel) throw std::invalid_argument("parallel_scale: strategy is not parallel");
  cfg.validate();
  const auto tests = require_public(problem);
  ScalingResult result;
  result.problem_id = problem.id;
  result.strategy = Strategy::parallel;

  const auto completions = generate_or_abort(
      gen, {problem_prompt(problem, Strategy::parallel), cfg.temperature, cfg.samples, round_seed(cfg, problem, 1)},
      result);
  const auto evaluated = evaluate_all(completions, false, tests, cfg);
  result.candidates_explored = evaluated.size();

  std::vector<std::string> summaries(evaluated.size());
  parallel_for(evaluated.size(), cfg.jobs,
               [&](std::size_t i) { summaries[i] = execution_summary(evaluated[i], tests, cfg); });

  std::vector<std::size_t> alive(evaluated.size());
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  std::vector<int> previous(evaluated.size(), 0);
  const std::size_t judge_jobs = judge.thread_safe() ? cfg.jobs : 1;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    RoundLog log = round == 1 ? log_round(1, evaluated) : RoundLog{};
    log.round = round;
    if (round == 1) log.diagnostics = summaries;

    std::vector<int> scores(alive.size(), kMinJudgeScore);
    std::vector<std::string> failures(alive.size());
    parallel_for(alive.size(), judge_jobs, [&](std::size_t k) {
      const std::size_t i = alive[k];
      const GenerationRequest request{scoring_prompt(problem, evaluated[i], summaries[i], alive.size()), 0.0, 1,
                                      rng::derive({cfg.seed, rng::fnv1a(problem.id), 0x6a75646765ULL,
                                                   static_cast<std::uint64_t>(round), i})};
      try {
        scores[k] = parse_judge_score(judge.generate(request).front()).value_or(kMinJudgeScore);
      } catch (const GeneratorError& e) {
        failures[k] = e.what();
      }
    });
    for (const auto& f : failures) {
      if (!f.empty()) throw ScalingAborted(judge.name() + ": " + f, result);
    }
    if (round > 1) result.candidates_explored += alive.size();
    log.scores = scores;
    result.per_round.push_back(std::move(log));
    result.rounds_used = round;

    bool stable = round > 1;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      if (previous[alive[k]] != scores[k]) stable = false;
      previous[alive[k]] = scores[k];
    }
    std::vector<std::size_t> order(alive.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      const auto& ca = evaluated[alive[a]].code;
      const auto& cb = evaluated[alive[b]].code;
      if (ca != cb) return ca < cb;
      return alive[a] < alive[b];
    });
    const std::size_t keep = std::max<std::size_t>(1, alive.size() / cfg.prune_divisor);
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < (stable ? 1 : keep); ++k) next.push_back(alive[order[k]]);
    alive = std::move(next);
    if (alive.size() == 1) break;
  }
  finish(result, evaluated[alive.front()], tests, cfg);
  return result;
}

ScalingResult run_strategy(Generator& gen, Generator* judge, const Problem& problem, const ScalingConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::greedy: return greedy(gen, problem, cfg);
    case Strategy::cot: return chain_of_thought(gen, problem, cfg);
    case Strategy::sequential: return sequential_scale(gen, problem, cfg);
    case Strategy::parallel:
      if (judge == nullptr) throw std::invalid_argument("parallel scaling needs a judge generator");
      return parallel_scale(gen, *judge, problem, cfg);
  }
  throw std::invalid_argument("unknown strategy");
}

Strategy select_compute_optimal(const std::map<Strategy, double>& rates) {
  if (rates.empty()) throw std::invalid_argument("select_compute_optimal: no strategies");
  const std::pair<const Strategy, double>* best = nullptr;
  for (const auto& entry : rates) {
    if (std::isnan(entry.second)) throw std::invalid_argument("select_compute_optimal: NaN solve rate");
    if (best == nullptr || entry.second > best->second ||
        (entry.second == best->second && strategy_cost(entry.first) < strategy_cost(best->first))) {
      best = &entry;
    }
  }
  return best->first;
}

}  // namespace tracescale
