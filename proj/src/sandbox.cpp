// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/sandbox.hpp"

#include <stdexcept>

#include "tracescale/text.hpp"
#include "tracescale/tokenizer.hpp"

namespace tracescale {

std::string_view to_string(Visibility v) { return v == Visibility::public_tests ? "public" : "private"; }

Visibility parse_visibility(std::string_view s) {
  if (s == "public") return Visibility::public_tests;
  if (s == "private") return Visibility::private_tests;
  throw std::invalid_argument("unknown test visibility: " + std::string(s));
}

nlohmann::ordered_json to_json(const TestCase& t) {
  return {{"id", t.id},
          {"input_spec", t.input_spec},
          {"expected_output", t.expected_output},
          {"visibility", to_string(t.visibility)}};
}

TestCase test_case_from_json(const nlohmann::json& j) {
  TestCase t;
  t.id = j.at("id").get<std::string>();
  t.input_spec = j.at("input_spec").get<std::string>();
  t.expected_output = j.at("expected_output").get<std::string>();
  t.visibility = parse_visibility(j.value("visibility", std::string("public")));
  return t;
}

std::vector<TestCase> with_visibility(std::span<const TestCase> tests, Visibility v) {
  std::vector<TestCase> out;
  for (const auto& t : tests) {
    if (t.visibility == v) out.push_back(t);
  }
  return out;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::syntax_error: return "syntax_error";
    case Outcome::execute_fail: return "execute_fail";
    case Outcome::testcase_fail: return "testcase_fail";
    case Outcome::timed_out: return "timed_out";
  }
  return "pass";
}

Outcome parse_outcome(std::string_view s) {
  if (s == "pass") return Outcome::pass;
  if (s == "syntax_error") return Outcome::syntax_error;
  if (s == "execute_fail") return Outcome::execute_fail;
  if (s == "testcase_fail") return Outcome::testcase_fail;
  if (s == "timed_out") return Outcome::timed_out;
  throw std::invalid_argument("unknown outcome: " + std::string(s));
}

int outcome_rank(Outcome o) {
  switch (o) {
    case Outcome::pass: return 4;
    case Outcome::testcase_fail: return 3;
    case Outcome::execute_fail: return 2;
    case Outcome::timed_out: return 1;
    case Outcome::syntax_error: return 0;
  }
  return 0;
}

Outcome three_way(Outcome o) { return o == Outcome::timed_out ? Outcome::execute_fail : o; }

Outcome classify(const RunStatus& status, bool output_match) {
  switch (status.kind) {
    case RunKind::syntax_error: return Outcome::syntax_error;
    case RunKind::raised: return Outcome::execute_fail;
    case RunKind::timed_out: return Outcome::timed_out;
    case RunKind::completed: return output_match ? Outcome::pass : Outcome::testcase_fail;
  }
  return Outcome::execute_fail;
}

bool outputs_match(std::string_view expected, std::string_view actual) {
  return text::normalize_trailing_whitespace(expected) == text::normalize_trailing_whitespace(actual);
}

namespace {

bool is_stdin_test(const TestCase& t) { return t.input_spec.rfind(kStdinPrefix, 0) == 0; }

std::string stdin_payload(const TestCase& t) {
  std::string s = t.input_spec.substr(kStdinPrefix.size());
  if (!s.empty() && s.front() == '\n') s.erase(0, 1);
  return s;
}

}  // namespace

RunRequest request_for(std::string_view source, const TestCase& test, const SandboxOptions& options, bool trace) {
  RunRequest r;
  r.source = std::string(source);
  r.trace = trace;
  r.limits = options.limits;
  r.seed = options.seed;
  r.memory_limit_bytes = options.memory_limit_bytes;
  if (is_stdin_test(test)) {
    r.stdin_text = stdin_payload(test);
  } else {
    r.invocation = test.input_spec;
  }
  return r;
}

std::string actual_output_of(const RawTrace& run, const TestCase& test) {
  if (is_stdin_test(test)) return run.stdout_text;
  if (!run.result) return {};
  if (*run.result == "None" && !run.stdout_text.empty()) return run.stdout_text;
  return *run.result;
}

ExecutionReport execute_candidate(std::string_view source, std::span<const TestCase> tests,
                                  const SandboxOptions& options, bool want_trace,
                                  TraceRepresentation representation) {
  if (tests.empty()) throw std::invalid_argument("execute_candidate: no test cases");
  ExecutionReport report;
  report.source = std::string(source);
  for (const auto& test : tests) {
    RawTrace run = run_subject(request_for(source, test, options, false));
    const std::string actual = actual_output_of(run, test);
    const bool match = run.status.kind == RunKind::completed && outputs_match(test.expected_output, actual);
    const Outcome outcome = classify(run.status, match);
    if (outcome == Outcome::pass) continue;

    report.outcome = outcome;
    report.failing_test = test.id;
    report.failing_case = test;
    report.actual_output = actual;
    report.error_detail = run.status.detail;
    if (want_trace && outcome != Outcome::syntax_error) {
      RawTrace traced = run_subject(request_for(source, test, options, true));
      report.trace = std::move(traced);
    }
    report.diagnostic = make_diagnostic(report, want_trace ? representation : TraceRepresentation::none,
                                        options.diagnostic_token_budget, options.semcoder_generator);
    return report;
  }
  report.outcome = Outcome::pass;
  return report;
}

std::string trace_heading(TraceRepresentation representation) {
  return "Execution trace (" + std::string(to_string(representation)) + "):";
}

std::string make_diagnostic(const ExecutionReport& report, TraceRepresentation representation,
                            std::size_t token_budget, Generator* semcoder_generator) {
  if (report.outcome == Outcome::pass) throw std::invalid_argument("make_diagnostic: report is a pass");
  std::string out = "Outcome: " + std::string(to_string(report.outcome)) + "\n";
  if (report.failing_case) {
    const auto& t = *report.failing_case;
    out += "Failing test: " + t.id + "\n";
    out += "Input: " + t.input_spec + "\n";
    out += "Expected output: " + t.expected_output + "\n";
  }
  switch (report.outcome) {
    case Outcome::testcase_fail: out += "Actual output: " + report.actual_output + "\n"; break;
    case Outcome::execute_fail:
    case Outcome::syntax_error: out += "Error: " + report.error_detail + "\n"; break;
    case Outcome::timed_out: out += "Error: execution exceeded the time limit\n"; break;
    case Outcome::pass: break;
  }
  if (representation != TraceRepresentation::none && report.trace && !report.trace->events.empty()) {
    const auto rendered = render_trace(representation, report.source, *report.trace, semcoder_generator);
    out += trace_heading(representation) + "\n" + rendered.text + "\n";
  }
  return truncate_to_tokens(out, token_budget);
}

nlohmann::ordered_json to_json(const ExecutionReport& report) {
  nlohmann::ordered_json j{{"outcome", to_string(report.outcome)}};
  j["failing_test"] = report.failing_test ? nlohmann::ordered_json(*report.failing_test) : nlohmann::ordered_json(nullptr);
  j["diagnostic"] = report.diagnostic;
  if (report.trace) j["trace"] = serialize_trace(*report.trace);
  return j;
}

}  // namespace tracescale
