// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "tracescale/parallel.hpp"
#include "tracescale/rng.hpp"
#include "tracescale/text.hpp"

namespace tracescale {

SolutionPool pool_from_json(const nlohmann::json& j) {
  SolutionPool p;
  p.problem_id = j.at("problem_id").get<std::string>();
  p.description = j.value("description", std::string());
  p.correct_solutions = j.value("correct_solutions", std::vector<std::string>{});
  p.incorrect_solutions = j.value("incorrect_solutions", std::vector<std::string>{});
  std::set<std::string> ids;
  for (const auto& t : j.value("tests", nlohmann::json::array())) {
    p.tests.push_back(test_case_from_json(t));
    if (!ids.insert(p.tests.back().id).second) {
      throw DatasetError(p.problem_id + ": duplicate test id " + p.tests.back().id);
    }
  }
  return p;
}

nlohmann::ordered_json to_json(const SolutionPool& pool) {
  nlohmann::ordered_json tests = nlohmann::ordered_json::array();
  for (const auto& t : pool.tests) tests.push_back(to_json(t));
  return {{"problem_id", pool.problem_id},
          {"description", pool.description},
          {"correct_solutions", pool.correct_solutions},
          {"incorrect_solutions", pool.incorrect_solutions},
          {"tests", tests}};
}

std::vector<SolutionPool> load_pools(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open pool file " + path.string());
  std::vector<SolutionPool> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::collapse_whitespace(line).empty()) continue;
    try {
      out.push_back(pool_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(out.back().problem_id).second) {
      throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": duplicate problem id " +
                         out.back().problem_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pairing

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: vectors differ in length");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double EmbeddingSimilarity::operator()(std::string_view a, std::string_view b) const {
  const auto va = embed_(a);
  const auto vb = embed_(b);
  return cosine(va, vb);
}

double TokenJaccardSimilarity::operator()(std::string_view a, std::string_view b) const {
  auto types = [&](std::string_view s) {
    std::set<std::string_view> out;
    for (const auto& span : tokenizer_->tokenize(s)) out.insert(s.substr(span.begin, span.end - span.begin));
    return out;
  };
  const auto ta = types(a);
  const auto tb = types(b);
  if (ta.empty() && tb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : ta) common += tb.count(t);
  return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
}

std::vector<RepairPair> match_pairs(const SolutionPool& pool, const Similarity& similarity, double threshold) {
  if (pool.correct_solutions.empty() || pool.incorrect_solutions.empty()) {
    throw DatasetError(pool.problem_id + ": pairing needs correct and incorrect solutions");
  }
  std::vector<RepairPair> out;
  for (const auto& buggy : pool.incorrect_solutions) {
    const std::string* best = nullptr;
    double best_sim = 0.0;
    for (const auto& patch : pool.correct_solutions) {
      const double s = similarity(buggy, patch);
      if (best == nullptr || s > best_sim || (s == best_sim && patch < *best)) {
        best = &patch;
        best_sim = s;
      }
    }
    if (best_sim > threshold) out.push_back({buggy, *best, best_sim});
  }
  return out;
}

std::vector<TestCase> select_failing_tests(std::string_view buggy, std::string_view patch,
                                           std::span<const TestCase> tests, const SandboxOptions& options) {
  std::vector<TestCase> out;
  for (const auto& t : tests) {
    const std::span<const TestCase> one(&t, 1);
    if (execute_candidate(patch, one, options, false, TraceRepresentation::none).outcome != Outcome::pass) continue;
    if (execute_candidate(buggy, one, options, false, TraceRepresentation::none).outcome == Outcome::pass) continue;
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rationales

std::string Rationale::text() const {
  if (representation == TraceRepresentation::none) return {};
  std::string out = "Buggy code run:\n" + buggy_text;
  if (!patch_text.empty()) out += "\n\nPatched code run:\n" + patch_text;
  return out;
}

PairRuns trace_pair(const RepairPair& pair, const TestCase& test, const SandboxOptions& options) {
  return {run_subject(request_for(pair.buggy, test, options, true)),
          run_subject(request_for(pair.patch, test, options, true))};
}

namespace {

std::string rendered_side(TraceRepresentation rep, std::string_view source, const RawTrace& run, Generator* gen) {
  std::string out;
  if (!run.events.empty()) out = render_trace(rep, source, run, gen).text;
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  auto add = [&](const std::string& line) { out += (out.empty() ? "" : "\n") + line; };
  if (run.status.kind == RunKind::raised) add("Error: " + run.status.detail);
  if (run.status.kind == RunKind::timed_out) add("Error: execution exceeded the time limit");
  return out;
}

}  // namespace

Rationale render_rationale(const RepairPair& pair, const TestCase& test, const PairRuns& runs,
                           TraceRepresentation representation, Generator* semcoder_generator) {
  (void)test;
  Rationale r;
  r.representation = representation;
  r.truncated = runs.buggy.truncated || runs.patch.truncated;
  if (representation == TraceRepresentation::none) return r;
  if (runs.buggy.status.kind == RunKind::syntax_error) {
    r.buggy_text = "Error: " + runs.buggy.status.detail;
    return r;
  }
  r.buggy_text = rendered_side(representation, pair.buggy, runs.buggy, semcoder_generator);
  r.patch_text = rendered_side(representation, pair.patch, runs.patch, semcoder_generator);
  return r;
}

Rationale attach_traces(const RepairPair& pair, const TestCase& test, TraceRepresentation representation,
                        const SandboxOptions& options, Generator* semcoder_generator) {
  return render_rationale(pair, test, trace_pair(pair, test, options), representation, semcoder_generator);
}

// ---------------------------------------------------------------------------
// Reasoning records

std::string_view to_string(ReasoningKind kind) {
  switch (kind) {
    case ReasoningKind::input_prediction: return "input_prediction";
    case ReasoningKind::output_prediction: return "output_prediction";
    case ReasoningKind::state_prediction: return "state_prediction";
    case ReasoningKind::coverage_prediction: return "coverage_prediction";
  }
  return "output_prediction";
}

nlohmann::ordered_json to_json(const ReasoningRecord& r) {
  return {{"problem_id", r.problem_id}, {"kind", to_string(r.kind)}, {"prompt", r.prompt}, {"answer", r.answer}};
}

namespace {

std::string code_block(std::string_view source) {
  std::string s = "```python\n" + std::string(source);
  if (s.back() != '\n') s += '\n';
  return s + "```";
}

struct CallParts {
  std::string function;
  std::string arguments;
};

std::optional<CallParts> split_call(std::string_view spec) {
  const auto open = spec.find('(');
  const auto close = spec.rfind(')');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  return CallParts{text::collapse_whitespace(spec.substr(0, open)),
                   std::string(spec.substr(open + 1, close - open - 1))};
}

}  // namespace

std::vector<ReasoningRecord> derive_reasoning_records(std::string_view problem_id, std::string_view solution,
                                                      const TestCase& test, const RawTrace& trace,
                                                      std::uint64_t seed) {
  std::vector<ReasoningRecord> out;
  const std::string pid(problem_id);
  const std::string code = code_block(solution);
  const bool is_stdin = test.input_spec.rfind(kStdinPrefix, 0) == 0;
  const std::string output = text::normalize_trailing_whitespace(actual_output_of(trace, test));
  const std::string run_desc = is_stdin ? "When the program runs on the given stdin" : "When `" + test.input_spec + "` runs";

  if (is_stdin) {
    std::string input = test.input_spec.substr(kStdinPrefix.size());
    if (!input.empty() && input.front() == '\n') input.erase(0, 1);
    out.push_back({pid, ReasoningKind::input_prediction,
                   code + "\n\nWhat stdin makes this program print the following?\n" + output, input});
    out.push_back({pid, ReasoningKind::output_prediction,
                   code + "\n\nWhat does this program print when its stdin is the following?\n" + input, output});
  } else {
    const auto call = split_call(test.input_spec);
    const std::string fname = call ? call->function : test.input_spec;
    out.push_back({pid, ReasoningKind::input_prediction,
                   code + "\n\nFill in the arguments so that the assertion holds.\nassert " + fname + "(\?\?) == " + output,
                   call ? call->arguments : test.input_spec});
    out.push_back({pid, ReasoningKind::output_prediction,
                   code + "\n\nComplete the assertion with the exact value.\nassert " + test.input_spec + " == ??",
                   output});
  }

  rng::Stream stream(rng::derive({seed, rng::fnv1a(problem_id), rng::fnv1a(test.id), rng::fnv1a(solution)}));
  const auto lines = text::split_lines(solution);
  std::vector<int> candidates;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto l = text::collapse_whitespace(lines[i]);
    if (!l.empty() && l.front() != '#') candidates.push_back(static_cast<int>(i) + 1);
  }
  if (!candidates.empty()) {
    const int line = candidates[stream.below(candidates.size())];
    const auto covered = trace.covered_lines();
    const bool executed = std::binary_search(covered.begin(), covered.end(), line);
    out.push_back({pid, ReasoningKind::coverage_prediction,
                   code + "\n\n" + run_desc + ", is line " + std::to_string(line) + " `" +
                       text::collapse_whitespace(lines[static_cast<std::size_t>(line) - 1]) +
                       "` executed? Answer \"executed\" or \"not executed\".",
                   executed ? "executed" : "not executed"});
  }

  std::vector<std::size_t> steps;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    if (trace.events[i].kind == EventKind::line) steps.push_back(i);
  }
  if (!steps.empty()) {
    const std::size_t k = stream.below(steps.size());
    if (k + 1 < steps.size()) {
      const auto& ev = trace.events[steps[k]];
      std::vector<std::string> state;
      for (const auto& [name, value] : ev.bindings) state.push_back(name + "=" + value);
      out.push_back({pid, ReasoningKind::state_prediction,
                     code + "\n\n" + run_desc + ", line " + std::to_string(ev.line) +
                         " has just executed and the variables are: " +
                         (state.empty() ? std::string("(none)") : text::join(state, ", ")) +
                         ". Which line executes next?",
                     std::to_string(trace.events[steps[k + 1]].line)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Description enrichment

std::string DescriptionEnricher::enrich(const std::string& problem_id, std::string_view description) {
  if (text::collapse_whitespace(description).empty()) {
    throw std::invalid_argument("enrich: problem " + problem_id + " has an empty description");
  }
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(problem_id); it != cache_.end()) return it->second;
  }
  const std::string prompt =
      "List the implementation constraints implied by the following programming problem: input types and "
      "ranges, edge cases, and the expected output format. Do not solve it.\n\n" +
      std::string(description);
  const auto reply = generator_->generate({prompt, 0.0, 1, rng::fnv1a(problem_id)});
  std::string enriched = std::string(description) + "\n\n" + reply.front();
  std::lock_guard lock(mu_);
  return cache_.emplace(problem_id, std::move(enriched)).first->second;
}

std::size_t DescriptionEnricher::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

// ---------------------------------------------------------------------------
// Records

std::string_view to_string(RecordMode mode) {
  return mode == RecordMode::rationale_in_input ? "rationale_in_input" : "rationale_in_output";
}

RecordMode parse_record_mode(std::string_view tag) {
  if (tag == "rationale_in_input") return RecordMode::rationale_in_input;
  if (tag == "rationale_in_output") return RecordMode::rationale_in_output;
  throw std::invalid_argument("unknown record mode: " + std::string(tag));
}

nlohmann::ordered_json to_json(const RepairRecord& r) {
  return {{"problem_id", r.problem_id},
          {"representation", to_string(r.representation)},
          {"mode", to_string(r.mode)},
          {"prompt", r.prompt},
          {"completion", r.completion}};
}

namespace {

AssembledText fill_template(const RecordFields& f, RecordMode mode, const std::string& description,
                            const std::string& rationale) {
  AssembledText t;
  t.rationale_text = rationale;
  t.prompt = "### Problem\n" + description + "\n\n### Buggy code\n" + code_block(f.buggy) +
             "\n\n### Failing test\nInput: " + f.failing_test.input_spec +
             "\nExpected output: " + f.failing_test.expected_output + "\n";
  if (mode == RecordMode::rationale_in_input) {
    if (!rationale.empty()) t.prompt += "\n### Execution traces\n" + rationale + "\n";
    t.prompt += "\n### Task\nFix the buggy code so that it passes the failing test. Answer with the corrected code only.\n";
    t.completion = code_block(f.patch) + "\n";
  } else {
    t.prompt +=
        "\n### Task\nFirst explain how the buggy code executes on the failing test, then give the corrected code.\n";
    t.completion = rationale.empty() ? code_block(f.patch) + "\n"
                                     : "### Rationale\n" + rationale + "\n\n### Fixed code\n" + code_block(f.patch) + "\n";
  }
  return t;
}

// Largest token prefix of `text` for which `fits` holds; `fits` must be
// monotone in the prefix length.
template <class Fits>
std::string longest_fitting_prefix(const std::string& text, const Tokenizer& tokenizer, Fits fits) {
  std::size_t lo = 0, hi = tokenizer.count(text);
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (fits(truncate_to_tokens(text, mid, tokenizer))) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return truncate_to_tokens(text, lo, tokenizer);
}

}  // namespace

AssembledText assemble_sft(const RecordFields& fields, RecordMode mode, std::size_t budget,
                           const Tokenizer& tokenizer) {
  if (tokenizer.count(fields.buggy) + tokenizer.count(fields.patch) > budget) {
    throw DatasetError("buggy and patched code alone exceed the " + std::to_string(budget) + "-token budget");
  }
  auto total = [&](const AssembledText& t) { return tokenizer.count(t.prompt) + tokenizer.count(t.completion); };
  const std::string rationale = fields.rationale.text();
  AssembledText full = fill_template(fields, mode, fields.description, rationale);
  if (total(full) <= budget) return full;

  const std::string kept_rationale = longest_fitting_prefix(rationale, tokenizer, [&](const std::string& r) {
    return total(fill_template(fields, mode, fields.description, r)) <= budget;
  });
  AssembledText out = fill_template(fields, mode, fields.description, kept_rationale);
  out.rationale_truncated = kept_rationale.size() < rationale.size();
  if (total(out) <= budget) return out;

  const std::string kept_description = longest_fitting_prefix(fields.description, tokenizer, [&](const std::string& d) {
    return total(fill_template(fields, mode, d, kept_rationale)) <= budget;
  });
  out = fill_template(fields, mode, kept_description, kept_rationale);
  out.rationale_truncated = kept_rationale.size() < rationale.size();
  out.description_truncated = kept_description.size() < fields.description.size();
  if (total(out) > budget) {
    throw DatasetError("record does not fit the " + std::to_string(budget) + "-token budget");
  }
  return out;
}

std::vector<std::string> normalize_corpus(std::span<const std::string> corpus) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& c : corpus) {
    auto n = text::collapse_whitespace(c);
    if (n.size() >= 32 && seen.insert(n).second) out.push_back(std::move(n));
  }
  return out;
}

namespace {

bool contaminated(const RepairRecord& r, const std::vector<std::string>& corpus) {
  const std::string fields[] = {text::collapse_whitespace(r.buggy), text::collapse_whitespace(r.patch),
                                text::collapse_whitespace(r.prompt)};
  for (const auto& c : corpus) {
    for (const auto& f : fields) {
      if (text::contains(f, c)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<RepairRecord> decontaminate(std::span<const RepairRecord> records, std::span<const std::string> corpus) {
  const auto norm = normalize_corpus(corpus);
  std::vector<RepairRecord> out;
  for (const auto& r : records) {
    if (!contaminated(r, norm)) out.push_back(r);
  }
  return out;
}

std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open corpus file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::collapse_whitespace(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(path.string() + ": " + e.what());
    }
    if (j.is_string()) {
      out.push_back(j.get<std::string>());
      continue;
    }
    if (!j.is_object()) continue;
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) {
        out.push_back(value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& v : value) {
          if (v.is_string()) out.push_back(v.get<std::string>());
        }
      }
    }
  }
  return out;
}

std::string extract_docstring(std::string_view source) {
  const auto dq = source.find("\"\"\"");
  const auto sq = source.find("'''");
  const auto open = std::min(dq, sq);
  if (open == std::string_view::npos) return {};
  const auto delim = source.substr(open, 3);
  const auto close = source.find(delim, open + 3);
  if (close == std::string_view::npos) return {};
  return text::collapse_whitespace(source.substr(open + 3, close - open - 3));
}

bool heuristic_docstring_judge(std::string_view source) { return count_tokens(extract_docstring(source)) >= 10; }

std::vector<RepairRecord> filter_docstrings(std::span<const RepairRecord> records, const DocstringJudge& judge,
                                            const WarningSink& warn) {
  std::map<std::string, bool> verdicts;
  std::vector<RepairRecord> out;
  for (const auto& r : records) {
    auto it = verdicts.find(r.patch);
    if (it == verdicts.end()) {
      bool keep = false;
      try {
        keep = judge(r.patch);
      } catch (const std::exception& e) {
        if (warn) warn("docstring judge failed on " + r.problem_id + " (" + e.what() + "); using the heuristic");
        keep = heuristic_docstring_judge(r.patch);
      }
      it = verdicts.emplace(r.patch, keep).first;
    }
    if (it->second) out.push_back(r);
  }
  return out;
}

bool verify_record(const RepairRecord& record, std::span<const TestCase> tests, const SandboxOptions& options) {
  if (record.failing_tests.empty()) return false;
  for (const auto& id : record.failing_tests) {
    auto it = std::find_if(tests.begin(), tests.end(), [&](const TestCase& t) { return t.id == id; });
    if (it == tests.end()) return false;
    const std::span<const TestCase> one(&*it, 1);
    if (execute_candidate(record.buggy, one, options, false, TraceRepresentation::none).outcome == Outcome::pass) {
      return false;
    }
    if (execute_candidate(record.patch, one, options, false, TraceRepresentation::none).outcome != Outcome::pass) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Whole pipeline

namespace {

struct Group {
  std::size_t problem = 0;
  std::vector<RepairRecord> records;
};

struct ProblemOutput {
  std::vector<Group> groups;
  std::vector<ReasoningRecord> reasoning;
  std::size_t invalid_correct = 0;
  std::size_t pairs = 0;
  std::size_t pairs_without_failing = 0;
  std::size_t failing_tests = 0;
  std::size_t rejected_over_budget = 0;
};

ProblemOutput build_problem(const SolutionPool& input, std::size_t index, const BuildOptions& options,
                            const Similarity& similarity, const WarningSink& warn) {
  ProblemOutput out;
  SolutionPool pool = input;
  std::erase_if(pool.correct_solutions, [&](const std::string& s) {
    const bool bad = pool.tests.empty() ||
                     execute_candidate(s, pool.tests, options.sandbox, false, TraceRepresentation::none).outcome !=
                         Outcome::pass;
    if (bad) {
      ++out.invalid_correct;
      if (warn) warn(pool.problem_id + ": dropping a correct solution that fails its tests");
    }
    return bad;
  });
  if (pool.correct_solutions.empty() || pool.incorrect_solutions.empty()) return out;

  const std::string description =
      options.enricher ? options.enricher->enrich(pool.problem_id, pool.description) : pool.description;
  const auto pairs = match_pairs(pool, similarity, options.similarity_threshold);
  out.pairs = pairs.size();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    const auto failing = select_failing_tests(pair.buggy, pair.patch, pool.tests, options.sandbox);
    if (failing.empty()) {
      ++out.pairs_without_failing;
      continue;
    }
    for (std::size_t t = 0; t < failing.size(); ++t) {
      const auto& test = failing[t];
      ++out.failing_tests;
      const PairRuns runs = trace_pair(pair, test, options.sandbox);
      Group group;
      group.problem = index;
      bool rejected = false;
      for (auto rep : options.representations) {
        const Rationale rationale = render_rationale(pair, test, runs, rep, options.semcoder_generator);
        for (auto mode : options.modes) {
          RecordFields fields{description, pair.buggy, pair.patch, test, rationale};
          AssembledText assembled;
          try {
            assembled = assemble_sft(fields, mode, options.token_budget);
          } catch (const DatasetError& e) {
            rejected = true;
            if (warn) warn(pool.problem_id + ": " + e.what());
            break;
          }
          RepairRecord r;
          r.problem_id = pool.problem_id;
          r.buggy = pair.buggy;
          r.patch = pair.patch;
          r.rationale = rationale;
          r.rationale_text = assembled.rationale_text;
          r.failing_tests = {test.id};
          r.representation = rep;
          r.mode = mode;
          r.prompt = std::move(assembled.prompt);
          r.completion = std::move(assembled.completion);
          group.records.push_back(std::move(r));
        }
        if (rejected) break;
      }
      if (rejected) {
        ++out.rejected_over_budget;
        continue;
      }
      out.groups.push_back(std::move(group));
      if (runs.patch.status.kind == RunKind::completed) {
        auto reasoning = derive_reasoning_records(pool.problem_id, pair.patch, test, runs.patch,
                                                  rng::derive({options.seed, p, t}));
        for (auto& rr : reasoning) out.reasoning.push_back(std::move(rr));
      }
    }
  }
  return out;
}

}  // namespace

BuildResult build_dataset(std::span<const SolutionPool> pools, const BuildOptions& options) {
  std::mutex warn_mu;
  WarningSink warn = [&](const std::string& msg) {
    if (!options.warn) return;
    std::lock_guard lock(warn_mu);
    options.warn(msg);
  };
  const TokenJaccardSimilarity fallback;
  const Similarity& similarity = options.similarity ? *options.similarity : fallback;

  std::vector<ProblemOutput> outputs(pools.size());
  parallel_for(pools.size(), options.jobs,
               [&](std::size_t i) { outputs[i] = build_problem(pools[i], i, options, similarity, warn); });

  BuildResult result;
  BuildStats& st = result.stats;
  st.problems = pools.size();
  const auto corpus = normalize_corpus(options.contamination_corpus);
  for (auto& out : outputs) {
    st.invalid_correct_solutions += out.invalid_correct;
    st.pairs += out.pairs;
    st.pairs_without_failing_tests += out.pairs_without_failing;
    st.failing_tests += out.failing_tests;
    st.rejected_over_budget += out.rejected_over_budget;
    for (auto& group : out.groups) {
      // Siblings differ only in rationale placement and rendering, so a
      // contaminated member takes the whole group with it.
      const std::size_t before = group.records.size();
      const auto clean = decontaminate(group.records, corpus);
      if (clean.size() != before) {
        st.removed_contaminated += before;
        continue;
      }
      if (options.docstring_judge) {
        const auto kept = filter_docstrings(group.records, *options.docstring_judge, warn);
        if (kept.size() != before) {
          st.removed_docstring += before;
          continue;
        }
      }
      if (options.verify) {
        const auto& pool = pools[group.problem];
        if (!verify_record(group.records.front(), pool.tests, options.sandbox)) {
          st.verification_failures += before;
          continue;
        }
        st.verified += before;
      }
      for (auto& r : group.records) result.records.push_back(std::move(r));
    }
    for (auto& rr : out.reasoning) result.reasoning.push_back(std::move(rr));
  }
  for (auto rep : options.representations) st.per_representation[std::string(to_string(rep))];
  for (auto mode : options.modes) st.per_mode[std::string(to_string(mode))];
  for (const auto& r : result.records) {
    auto& s = st.per_representation[std::string(to_string(r.representation))];
    ++s.records;
    s.prompt_tokens += count_tokens(r.prompt);
    s.completion_tokens += count_tokens(r.completion);
    s.rationale_tokens += count_tokens(r.rationale_text);
    if (r.rationale.truncated || r.rationale_text.size() < r.rationale.text().size()) ++st.truncated_rationales;
    ++st.per_mode[std::string(to_string(r.mode))];
  }
  st.reasoning_records = result.reasoning.size();
  return result;
}

nlohmann::ordered_json to_json(const BuildStats& s) {
  nlohmann::ordered_json reps = nlohmann::ordered_json::object();
  for (const auto& [name, r] : s.per_representation) {
    reps[name] = {{"records", r.records},
                  {"prompt_tokens", r.prompt_tokens},
                  {"completion_tokens", r.completion_tokens},
                  {"rationale_tokens", r.rationale_tokens},
                  {"total_tokens", r.total_tokens()}};
  }
  nlohmann::ordered_json modes = nlohmann::ordered_json::object();
  for (const auto& [name, n] : s.per_mode) modes[name] = n;
  return {{"problems", s.problems},
          {"invalid_correct_solutions", s.invalid_correct_solutions},
          {"pairs", s.pairs},
          {"pairs_without_failing_tests", s.pairs_without_failing_tests},
          {"failing_tests", s.failing_tests},
          {"rejected_over_budget", s.rejected_over_budget},
          {"removed_contaminated", s.removed_contaminated},
          {"removed_docstring", s.removed_docstring},
          {"verified", s.verified},
          {"verification_failures", s.verification_failures},
          {"truncated_rationales", s.truncated_rationales},
          {"reasoning_records", s.reasoning_records},
          {"per_representation", reps},
          {"per_mode", modes}};
}

void write_records(const std::filesystem::path& path, std::span<const RepairRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  text::write_file(path, out);
}

void write_reasoning(const std::filesystem::path& path, std::span<const ReasoningRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  text::write_file(path, out);
}

}  // namespace tracescale
