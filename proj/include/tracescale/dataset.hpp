// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Repair-dataset construction from pools of correct and incorrect solutions.
//
// Pipeline per problem: pair each incorrect solution with its most similar
// correct one, keep the tests that separate them, trace both programs on each
// separating test, and assemble one supervised record per representation and
// rationale placement. Decontamination and docstring filtering run over the
// assembled records.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tracescale/generator.hpp"
#include "tracescale/sandbox.hpp"
#include "tracescale/trace_adapters.hpp"

namespace tracescale {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolutionPool {
  std::string problem_id;
  std::string description;
  std::vector<std::string> correct_solutions;
  std::vector<std::string> incorrect_solutions;
  std::vector<TestCase> tests;
};

SolutionPool pool_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SolutionPool& pool);

/// One pool per non-blank line. Throws DatasetError on malformed lines or
/// duplicate problem ids.
std::vector<SolutionPool> load_pools(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Pairing

class Similarity {
 public:
  virtual ~Similarity() = default;
  virtual double operator()(std::string_view a, std::string_view b) const = 0;
};

double cosine(std::span<const double> a, std::span<const double> b);

using Embedder = std::function<std::vector<double>(std::string_view)>;

/// Cosine similarity of embedder outputs.
class EmbeddingSimilarity final : public Similarity {
 public:
  explicit EmbeddingSimilarity(Embedder embed) : embed_(std::move(embed)) {}
  double operator()(std::string_view a, std::string_view b) const override;

 private:
  Embedder embed_;
};

/// Jaccard index of the two programs' token-type sets. Needs no model.
class TokenJaccardSimilarity final : public Similarity {
 public:
  explicit TokenJaccardSimilarity(const Tokenizer& tokenizer = default_tokenizer()) : tokenizer_(&tokenizer) {}
  double operator()(std::string_view a, std::string_view b) const override;

 private:
  const Tokenizer* tokenizer_;
};

struct RepairPair {
  std::string buggy;
  std::string patch;
  double similarity = 0.0;
};

/// Pairs every incorrect solution with its most similar correct solution when
/// the similarity is strictly above `threshold`. Equal similarities go to the
/// lexicographically smaller patch. Throws DatasetError when either side of
/// the pool is empty.
std::vector<RepairPair> match_pairs(const SolutionPool& pool, const Similarity& similarity, double threshold = 0.8);

/// Tests the buggy program does not pass and the patch does.
std::vector<TestCase> select_failing_tests(std::string_view buggy, std::string_view patch,
                                           std::span<const TestCase> tests, const SandboxOptions& options);

// ---------------------------------------------------------------------------
// Rationales

struct Rationale {
  TraceRepresentation representation = TraceRepresentation::none;
  std::string buggy_text;
  std::string patch_text;
  bool truncated = false;

  /// Both sides with headings; empty for the none representation.
  std::string text() const;
};

/// Raw runs of both programs on one test, traced once and rendered many times.
struct PairRuns {
  RawTrace buggy;
  RawTrace patch;
};

PairRuns trace_pair(const RepairPair& pair, const TestCase& test, const SandboxOptions& options);

Rationale render_rationale(const RepairPair& pair, const TestCase& test, const PairRuns& runs,
                           TraceRepresentation representation, Generator* semcoder_generator = nullptr);

Rationale attach_traces(const RepairPair& pair, const TestCase& test, TraceRepresentation representation,
                        const SandboxOptions& options, Generator* semcoder_generator = nullptr);

// ---------------------------------------------------------------------------
// Reasoning records

enum class ReasoningKind { input_prediction, output_prediction, state_prediction, coverage_prediction };

std::string_view to_string(ReasoningKind kind);

struct ReasoningRecord {
  std::string problem_id;
  ReasoningKind kind = ReasoningKind::output_prediction;
  std::string prompt;
  std::string answer;
};

nlohmann::ordered_json to_json(const ReasoningRecord& r);

/// Input, output and coverage questions, plus a next-line question at a
/// sampled line step unless that step is the last one. `trace` must come
/// from a passing run of `solution` on `test`.
std::vector<ReasoningRecord> derive_reasoning_records(std::string_view problem_id, std::string_view solution,
                                                      const TestCase& test, const RawTrace& trace,
                                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Description enrichment

class DescriptionEnricher {
 public:
  explicit DescriptionEnricher(Generator& generator) : generator_(&generator) {}

  /// Base description, a blank line, then the generator's constraints.
  /// Cached by problem id. Throws std::invalid_argument on an empty description.
  std::string enrich(const std::string& problem_id, std::string_view description);

  std::size_t cache_size() const;

 private:
  Generator* generator_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> cache_;
};

// ---------------------------------------------------------------------------
// Records

enum class RecordMode { rationale_in_input, rationale_in_output };

std::string_view to_string(RecordMode mode);
/// Throws std::invalid_argument for unknown tags.
RecordMode parse_record_mode(std::string_view tag);

struct RepairRecord {
  std::string problem_id;
  std::string buggy;
  std::string patch;
  Rationale rationale;
  /// The rationale as it appears in the record, after budget truncation.
  std::string rationale_text;
  std::vector<std::string> failing_tests;
  TraceRepresentation representation = TraceRepresentation::none;
  RecordMode mode = RecordMode::rationale_in_input;
  std::string prompt;
  std::string completion;
};

/// The exported form: {problem_id, representation, mode, prompt, completion}.
nlohmann::ordered_json to_json(const RepairRecord& r);

struct RecordFields {
  std::string description;
  std::string buggy;
  std::string patch;
  TestCase failing_test;
  Rationale rationale;
};

struct AssembledText {
  std::string prompt;
  std::string completion;
  std::string rationale_text;
  bool rationale_truncated = false;
  bool description_truncated = false;
};

/// Fills the prompt template for `mode`. When the total runs over `budget`
/// tokens the rationale is cut first, then the description. Throws
/// DatasetError when the two programs alone exceed the budget or the record
/// cannot be brought under it.
AssembledText assemble_sft(const RecordFields& fields, RecordMode mode, std::size_t budget = 2048,
                           const Tokenizer& tokenizer = default_tokenizer());

/// Whitespace-collapsed corpus entries of at least 32 characters.
std::vector<std::string> normalize_corpus(std::span<const std::string> corpus);

/// Drops records whose buggy, patch or prompt contains a corpus entry.
std::vector<RepairRecord> decontaminate(std::span<const RepairRecord> records, std::span<const std::string> corpus);

/// Reads every string field of every JSON line: prompts, solutions, ...
std::vector<std::string> load_corpus(const std::filesystem::path& path);

/// Keep/drop verdict on a source text. May throw.
using DocstringJudge = std::function<bool(std::string_view source)>;

/// First docstring of the program, empty when there is none.
std::string extract_docstring(std::string_view source);

/// Keeps sources whose first docstring has at least 10 tokens.
bool heuristic_docstring_judge(std::string_view source);

using WarningSink = std::function<void(const std::string&)>;

/// Keeps records whose patch the judge accepts. A throwing judge falls back
/// to the heuristic for that record and reports through `warn`.
std::vector<RepairRecord> filter_docstrings(std::span<const RepairRecord> records, const DocstringJudge& judge,
                                            const WarningSink& warn = {});

/// Re-runs the sandbox: the buggy program must fail every listed test and the
/// patch must pass them.
bool verify_record(const RepairRecord& record, std::span<const TestCase> tests, const SandboxOptions& options);

// ---------------------------------------------------------------------------
// Whole pipeline

struct BuildOptions {
  std::vector<TraceRepresentation> representations{
      TraceRepresentation::none,    TraceRepresentation::next,
      TraceRepresentation::code_executor, TraceRepresentation::concise,
      TraceRepresentation::semcoder_template, TraceRepresentation::scratchpad};
  std::vector<RecordMode> modes{RecordMode::rationale_in_input, RecordMode::rationale_in_output};
  double similarity_threshold = 0.8;
  std::size_t token_budget = 2048;
  SandboxOptions sandbox;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::vector<std::string> contamination_corpus;
  /// Unset disables docstring filtering.
  std::optional<DocstringJudge> docstring_judge = DocstringJudge(heuristic_docstring_judge);
  /// Unset falls back to TokenJaccardSimilarity.
  std::shared_ptr<const Similarity> similarity;
  DescriptionEnricher* enricher = nullptr;
  Generator* semcoder_generator = nullptr;
  bool verify = true;
  WarningSink warn;
};

struct RepresentationStats {
  std::size_t records = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t rationale_tokens = 0;
  std::size_t total_tokens() const { return prompt_tokens + completion_tokens; }
};

struct BuildStats {
  std::size_t problems = 0;
  std::size_t invalid_correct_solutions = 0;
  std::size_t pairs = 0;
  std::size_t pairs_without_failing_tests = 0;
  std::size_t failing_tests = 0;
  std::size_t rejected_over_budget = 0;
  std::size_t removed_contaminated = 0;
  std::size_t removed_docstring = 0;
  std::size_t verified = 0;
  std::size_t verification_failures = 0;
  std::size_t truncated_rationales = 0;
  std::size_t reasoning_records = 0;
  std::map<std::string, RepresentationStats> per_representation;
  std::map<std::string, std::size_t> per_mode;
};

struct BuildResult {
  std::vector<RepairRecord> records;
  std::vector<ReasoningRecord> reasoning;
  BuildStats stats;
};

BuildResult build_dataset(std::span<const SolutionPool> pools, const BuildOptions& options);

/// Manifest body: counts and token totals per representation.
nlohmann::ordered_json to_json(const BuildStats& stats);

void write_records(const std::filesystem::path& path, std::span<const RepairRecord> records);
void write_reasoning(const std::filesystem::path& path, std::span<const ReasoningRecord> records);

}  // namespace tracescale
