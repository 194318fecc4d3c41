// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Candidate evaluation against test cases, one rlimited child per test.
//
// A test's input_spec is a Python call expression evaluated against the
// candidate ("add(1, 2)"); its actual output is repr() of the returned value,
// or the captured stdout when the call returns None and printed something.
// An input_spec starting with "stdin:" instead runs the candidate as a
// script with the remainder on stdin and compares stdout.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tracescale/generator.hpp"
#include "tracescale/trace_adapters.hpp"
#include "tracescale/trace_capture.hpp"

namespace tracescale {

enum class Visibility { public_tests, private_tests };

std::string_view to_string(Visibility v);
Visibility parse_visibility(std::string_view s);

struct TestCase {
  std::string id;
  std::string input_spec;
  std::string expected_output;
  Visibility visibility = Visibility::public_tests;

  friend bool operator==(const TestCase&, const TestCase&) = default;
};

inline constexpr std::string_view kStdinPrefix = "stdin:";

nlohmann::ordered_json to_json(const TestCase& t);
TestCase test_case_from_json(const nlohmann::json& j);

std::vector<TestCase> with_visibility(std::span<const TestCase> tests, Visibility v);

enum class Outcome { pass, syntax_error, execute_fail, testcase_fail, timed_out };

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);

/// pass > testcase_fail > execute_fail > timed_out > syntax_error.
int outcome_rank(Outcome o);

/// Folds timed_out into execute_fail for three-way error breakdowns.
Outcome three_way(Outcome o);

struct ExecutionReport {
  Outcome outcome = Outcome::pass;
  std::optional<std::string> failing_test;
  std::string diagnostic;
  std::optional<RawTrace> trace;

  // Context kept so the diagnostic can be re-rendered under another representation.
  std::string source;
  std::optional<TestCase> failing_case;
  std::string actual_output;
  std::string error_detail;
};

Outcome classify(const RunStatus& status, bool output_match);

/// Exact equality after stripping trailing whitespace per line and trailing
/// blank lines.
bool outputs_match(std::string_view expected, std::string_view actual);

struct SandboxOptions {
  Limits limits;
  std::size_t memory_limit_bytes = std::size_t{512} << 20;
  std::size_t diagnostic_token_budget = 2048;
  std::uint64_t seed = 0;
  /// Only needed for semcoder_llm diagnostics.
  Generator* semcoder_generator = nullptr;
};

RunRequest request_for(std::string_view source, const TestCase& test, const SandboxOptions& options, bool trace);
std::string actual_output_of(const RawTrace& run, const TestCase& test);

/// Runs `tests` in order and stops at the first failure. Throws
/// std::invalid_argument when `tests` is empty.
ExecutionReport execute_candidate(std::string_view source, std::span<const TestCase> tests,
                                  const SandboxOptions& options, bool want_trace,
                                  TraceRepresentation representation);

/// Outcome, failing test input, expected vs actual, then the failing run's
/// trace under `representation` (omitted for none). Tail-truncated to the
/// budget. Throws std::invalid_argument for a passing report.
std::string make_diagnostic(const ExecutionReport& report, TraceRepresentation representation,
                            std::size_t token_budget = 2048, Generator* semcoder_generator = nullptr);

/// Heading that introduces the trace block of a diagnostic.
std::string trace_heading(TraceRepresentation representation);

nlohmann::ordered_json to_json(const ExecutionReport& report);

}  // namespace tracescale
