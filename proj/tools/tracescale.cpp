// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point. Each subcommand is a thin wrapper over the
// library and writes one manifest next to its outputs.
//
// Exit codes: 0 success, 1 the run finished but failed its goal (a program
// that did not run cleanly, an unsolved problem, an empty dataset), 2 bad
// usage or configuration.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracescale/dataset.hpp"
#include "tracescale/eval.hpp"
#include "tracescale/generator.hpp"
#include "tracescale/process.hpp"
#include "tracescale/scaling.hpp"
#include "tracescale/text.hpp"
#include "tracescale/trace_adapters.hpp"
#include "tracescale/trace_capture.hpp"

#ifndef TRACESCALE_VERSION
#define TRACESCALE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace tracescale;

namespace {

constexpr int kSuccess = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsageError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  Json config = Json::object();
  std::string config_toml;
  Json seeds = Json::object();
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  Json summary = Json::object();
  Clock::time_point started = Clock::now();
};

void write_manifest(const fs::path& path, const Manifest& m, int exit_code) {
  const double wall = std::chrono::duration<double>(Clock::now() - m.started).count();
  Json j;
  j["command"] = m.command;
  j["tool_version"] = TRACESCALE_VERSION;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["config_toml"] = m.config_toml;
  j["seeds"] = m.seeds;
  Json in = Json::array(), out = Json::array();
  for (const auto& p : m.inputs) in.push_back(p.string());
  for (const auto& p : m.outputs) out.push_back(p.string());
  j["inputs"] = in;
  j["outputs"] = out;
  j["exit_code"] = exit_code;
  j["wall_time_seconds"] = wall;
  j["summary"] = m.summary;
  text::write_file(path, j.dump(2) + "\n");
}

std::string read_input(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("cannot read input file " + path.string());
  return text::read_file(path);
}

void require_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("cannot read input file " + path.string());
}

// Refuses to run when an output would overwrite one of the inputs.
void ensure_distinct(const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  for (const auto& out : outputs) {
    const auto o = fs::weakly_canonical(out);
    for (const auto& in : inputs) {
      if (fs::weakly_canonical(in) == o) throw UsageError("output " + out.string() + " would overwrite an input");
    }
  }
}

fs::path manifest_beside(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void make_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<std::string> representation_names() {
  std::vector<std::string> out;
  for (auto rep : {TraceRepresentation::none, TraceRepresentation::next, TraceRepresentation::code_executor,
                   TraceRepresentation::concise, TraceRepresentation::semcoder_template,
                   TraceRepresentation::semcoder_llm, TraceRepresentation::scratchpad}) {
    out.emplace_back(to_string(rep));
  }
  return out;
}

const std::vector<std::string> kStrategyNames{"greedy", "cot", "sequential", "parallel"};

// ---------------------------------------------------------------------------
// Shared flag groups

struct LimitFlags {
  Limits limits;
  std::size_t memory_mb = 512;

  void add(CLI::App* app) {
    app->add_option("--max-steps", limits.max_steps, "Trace events kept per run")->capture_default_str();
    app->add_option("--max-wall-time", limits.max_wall_time, "Seconds before a run is killed")->capture_default_str();
    app->add_option("--max-render-bytes", limits.max_render_bytes, "Bytes of rendered state per trace")
        ->capture_default_str();
    app->add_option("--max-value-width", limits.max_value_width, "Characters per rendered value")
        ->capture_default_str();
    app->add_option("--max-container-elements", limits.max_container_elements, "Elements shown per container")
        ->capture_default_str();
    app->add_option("--memory-limit-mb", memory_mb, "Address-space cap of each run")->capture_default_str();
  }

  Json json() const {
    return Json{{"max_steps", limits.max_steps},
                {"max_wall_time", limits.max_wall_time},
                {"max_render_bytes", limits.max_render_bytes},
                {"max_value_width", limits.max_value_width},
                {"max_container_elements", limits.max_container_elements},
                {"memory_limit_mb", memory_mb}};
  }

  SandboxOptions sandbox(std::uint64_t seed) const {
    limits.validate();
    SandboxOptions o;
    o.limits = limits;
    o.memory_limit_bytes = memory_mb << 20;
    o.seed = seed;
    return o;
  }
};

struct BackendFlags {
  std::string backend = "mock";
  std::string script;
  std::string judge_script;
  std::string name = "live";
  std::string endpoint;
  std::string model;
  std::string judge_model;
  std::string api_key_env = "TRACESCALE_API_KEY";
  double timeout = 120.0;

  void add(CLI::App* app) {
    app->add_option("--backend", backend, "Generator backend")
        ->check(CLI::IsMember({"mock", "live"}))
        ->capture_default_str();
    app->add_option("--script", script, "Mock generator script (JSON)");
    app->add_option("--judge-script", judge_script, "Mock judge script (JSON)");
    app->add_option("--backend-name", name, "Name of the live backend")->capture_default_str();
    app->add_option("--endpoint", endpoint, "Base URL of an OpenAI-compatible API");
    app->add_option("--model", model, "Model served by the endpoint");
    app->add_option("--judge-model", judge_model, "Judge model; defaults to --model");
    app->add_option("--api-key-env", api_key_env, "Environment variable that holds the API key")
        ->capture_default_str();
    app->add_option("--request-timeout", timeout, "Seconds per live request")->capture_default_str();
  }

  Json json() const {
    Json j{{"backend", backend}};
    if (backend == "mock") {
      j["script"] = script;
      if (!judge_script.empty()) j["judge_script"] = judge_script;
    } else {
      j["backend_name"] = name;
      j["endpoint"] = endpoint;
      j["model"] = model;
      if (!judge_model.empty()) j["judge_model"] = judge_model;
      j["api_key_env"] = api_key_env;
      j["request_timeout"] = timeout;
    }
    return j;
  }

  bool has_judge() const { return backend == "live" ? true : !judge_script.empty(); }

  std::unique_ptr<Generator> make(bool judge, Manifest& m) const {
    if (backend == "mock") {
      const std::string& path = judge ? judge_script : script;
      if (path.empty()) throw UsageError(judge ? "--judge-script is required" : "--script is required for --backend mock");
      m.inputs.emplace_back(path);
      Script parsed;
      try {
        parsed = parse_script(read_input(path));
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception& e) {
        throw UsageError("invalid script " + path + ": " + e.what());
      }
      return std::make_unique<ScriptedGenerator>(std::move(parsed), judge ? "mock-judge" : "mock");
    }
    LiveBackendConfig cfg;
    cfg.name = name;
    cfg.endpoint = endpoint;
    cfg.model = judge && !judge_model.empty() ? judge_model : model;
    cfg.api_key_env = api_key_env;
    cfg.timeout_seconds = timeout;
    return make_live_generator(cfg);
  }
};

struct StrategyFlags {
  std::string strategy = "sequential";
  std::size_t samples = 8;
  double temperature = 0.7;
  int rounds = 4;
  std::size_t prune_divisor = 2;
  std::string representation = "concise";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void add(CLI::App* app) {
    app->add_option("--strategy", strategy, "Scaling strategy")
        ->check(CLI::IsMember(kStrategyNames))
        ->capture_default_str();
    app->add_option("--samples", samples, "Candidates per round (N)")->capture_default_str();
    app->add_option("--temperature", temperature, "Sampling temperature")->capture_default_str();
    app->add_option("--rounds", rounds, "Round budget (R_max)")->capture_default_str();
    app->add_option("--prune-divisor", prune_divisor, "Parallel pruning divisor (M)")->capture_default_str();
    app->add_option("--representation", representation, "Trace representation in diagnostics")
        ->check(CLI::IsMember(representation_names()))
        ->capture_default_str();
    app->add_option("--seed", seed, "Master seed")->capture_default_str();
    app->add_option("--jobs", jobs, "Concurrent subject processes")->capture_default_str();
  }

  ScalingConfig config(const LimitFlags& limits) const {
    ScalingConfig cfg;
    cfg.strategy = parse_strategy(strategy);
    cfg.samples = samples;
    cfg.temperature = temperature;
    cfg.max_rounds = rounds;
    cfg.prune_divisor = prune_divisor;
    cfg.representation = parse_representation(representation);
    cfg.seed = seed;
    cfg.jobs = jobs;
    cfg.sandbox = limits.sandbox(seed);
    cfg.cache = std::make_shared<ExecutionCache>();
    cfg.validate();
    return cfg;
  }
};

void set_jobs(std::size_t jobs) {
  if (jobs == 0) throw UsageError("--jobs must be at least 1");
  set_max_concurrent_processes(jobs);
}

void log_line(const std::string& line) { std::cerr << line << "\n"; }

// ---------------------------------------------------------------------------
// trace

struct TraceFlags {
  fs::path source;
  std::string invocation;
  fs::path stdin_path;
  fs::path out;
  std::uint64_t seed = 0;
  LimitFlags limits;
};

int cmd_trace(const TraceFlags& f, Manifest& m) {
  m.inputs.push_back(f.source);
  if (!f.stdin_path.empty()) m.inputs.push_back(f.stdin_path);
  m.outputs = {f.out};
  ensure_distinct(m.inputs, m.outputs);

  RunRequest r;
  r.source = read_input(f.source);
  r.invocation = f.invocation;
  if (f.invocation.empty()) r.stdin_text = f.stdin_path.empty() ? std::string() : read_input(f.stdin_path);
  r.limits = f.limits.limits;
  r.limits.validate();
  r.memory_limit_bytes = f.limits.memory_mb << 20;
  r.seed = f.seed;
  m.config = Json{{"source", f.source.string()},
                  {"invocation", f.invocation},
                  {"mode", f.invocation.empty() ? "script" : "invoke"},
                  {"limits", f.limits.json()}};
  m.seeds = Json{{"seed", f.seed}};

  const RawTrace t = run_subject(r);
  make_parent(f.out);
  text::write_file(f.out, serialize_trace(t));

  const bool failed = t.status.kind == RunKind::syntax_error || t.status.kind == RunKind::timed_out;
  m.summary = Json{{"status", to_string(t.status.kind)},
                   {"detail", t.status.detail},
                   {"events", t.events.size()},
                   {"truncated", t.truncated}};
  std::cout << to_string(t.status.kind) << ": " << t.events.size() << " events";
  if (!t.status.detail.empty()) std::cout << " (" << t.status.detail << ")";
  std::cout << "\n";
  const int code = failed ? kDomainFailure : kSuccess;
  write_manifest(manifest_beside(f.out), m, code);
  return code;
}

// ---------------------------------------------------------------------------
// render

struct RenderFlags {
  fs::path trace;
  fs::path source;
  std::string representation;
  fs::path out;
  BackendFlags backend;
};

int cmd_render(const RenderFlags& f, Manifest& m) {
  const TraceRepresentation rep = parse_representation(f.representation);
  m.inputs.push_back(f.trace);
  if (!f.source.empty()) m.inputs.push_back(f.source);
  m.outputs = {f.out};
  ensure_distinct(m.inputs, m.outputs);
  const bool needs_source = rep == TraceRepresentation::next || rep == TraceRepresentation::semcoder_template ||
                            rep == TraceRepresentation::semcoder_llm;
  if (needs_source && f.source.empty()) throw UsageError(f.representation + " needs --source");

  RawTrace t;
  try {
    t = parse_trace(read_input(f.trace));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError("invalid trace file " + f.trace.string() + ": " + e.what());
  }
  const std::string source = f.source.empty() ? std::string() : read_input(f.source);
  std::unique_ptr<Generator> gen;
  if (rep == TraceRepresentation::semcoder_llm) gen = f.backend.make(false, m);

  m.config = Json{{"trace", f.trace.string()}, {"source", f.source.string()}, {"representation", f.representation}};
  if (gen) m.config["backend"] = f.backend.json();

  const RenderedTrace r = render_trace(rep, source, t, gen.get());
  make_parent(f.out);
  const Json body{{"representation", to_string(r.representation)}, {"token_count", r.token_count}, {"text", r.text}};
  text::write_file(f.out, body.dump(2) + "\n");
  m.summary = Json{{"token_count", r.token_count}};
  std::cout << r.text;
  write_manifest(manifest_beside(f.out), m, kSuccess);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// build-dataset

struct BuildFlags {
  fs::path pools;
  std::vector<std::string> representations;
  std::vector<std::string> modes;
  fs::path corpus;
  fs::path out_dir;
  double threshold = 0.8;
  std::size_t budget = 2048;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool no_docstring_filter = false;
  bool no_verify = false;
  LimitFlags limits;
  BackendFlags backend;
};

int cmd_build_dataset(const BuildFlags& f, Manifest& m) {
  set_jobs(f.jobs);
  require_file(f.pools);
  m.inputs.push_back(f.pools);
  if (!f.corpus.empty()) m.inputs.push_back(f.corpus);
  const fs::path records_path = f.out_dir / "records.jsonl";
  const fs::path reasoning_path = f.out_dir / "reasoning.jsonl";
  const fs::path manifest_path = f.out_dir / "manifest.json";
  m.outputs = {records_path, reasoning_path};
  ensure_distinct(m.inputs, {records_path, reasoning_path, manifest_path});

  BuildOptions o;
  if (!f.representations.empty()) {
    o.representations.clear();
    for (const auto& tag : f.representations) o.representations.push_back(parse_representation(tag));
  }
  if (!f.modes.empty()) {
    o.modes.clear();
    for (const auto& tag : f.modes) o.modes.push_back(parse_record_mode(tag));
  }
  o.similarity_threshold = f.threshold;
  o.token_budget = f.budget;
  o.sandbox = f.limits.sandbox(f.seed);
  o.seed = f.seed;
  o.jobs = f.jobs;
  if (!f.corpus.empty()) {
    require_file(f.corpus);
    o.contamination_corpus = load_corpus(f.corpus);
  }
  if (f.no_docstring_filter) o.docstring_judge.reset();
  o.verify = !f.no_verify;
  o.warn = log_line;
  std::unique_ptr<Generator> gen;
  for (auto rep : o.representations) {
    if (rep == TraceRepresentation::semcoder_llm && !gen) gen = f.backend.make(false, m);
  }
  o.semcoder_generator = gen.get();
  o.sandbox.semcoder_generator = gen.get();

  Json reps = Json::array(), modes = Json::array();
  for (auto rep : o.representations) reps.push_back(to_string(rep));
  for (auto mode : o.modes) modes.push_back(to_string(mode));
  m.config = Json{{"pools", f.pools.string()},
                  {"representations", reps},
                  {"modes", modes},
                  {"decontaminate", f.corpus.string()},
                  {"threshold", f.threshold},
                  {"budget", f.budget},
                  {"docstring_filter", !f.no_docstring_filter},
                  {"verify", !f.no_verify},
                  {"jobs", f.jobs},
                  {"limits", f.limits.json()}};
  if (gen) m.config["backend"] = f.backend.json();
  m.seeds = Json{{"seed", f.seed}};

  const auto pools = load_pools(f.pools);
  const BuildResult result = build_dataset(pools, o);
  fs::create_directories(f.out_dir);
  write_records(records_path, result.records);
  write_reasoning(reasoning_path, result.reasoning);
  m.summary = Json{{"records", result.records.size()}, {"reasoning_records", result.reasoning.size()}};
  m.summary["stats"] = to_json(result.stats);

  std::cout << result.records.size() << " records, " << result.reasoning.size() << " reasoning records\n";
  for (const auto& [rep, st] : result.stats.per_representation) {
    std::cout << rep << "\t" << st.records << "\t" << st.total_tokens() << "\n";
  }
  const int code = result.records.empty() ? kDomainFailure : kSuccess;
  write_manifest(manifest_path, m, code);
  return code;
}

// ---------------------------------------------------------------------------
// scale, evaluate, sweep

struct RunFlags {
  fs::path benchmark;
  fs::path out;
  StrategyFlags strategy;
  LimitFlags limits;
  BackendFlags backend;
};

Json run_config_json(const RunFlags& f, const ScalingConfig& cfg) {
  Json j = to_json(cfg);
  j["benchmark"] = f.benchmark.string();
  j["jobs"] = f.strategy.jobs;
  j["limits"] = f.limits.json();
  j["backend"] = f.backend.json();
  return j;
}

struct Generators {
  std::unique_ptr<Generator> gen;
  std::unique_ptr<Generator> judge;
};

Generators make_generators(const RunFlags& f, bool need_judge, Manifest& m) {
  Generators g;
  g.gen = f.backend.make(false, m);
  if (need_judge) {
    if (!f.backend.has_judge()) throw UsageError("the parallel strategy needs --judge-script");
    g.judge = f.backend.make(true, m);
  }
  return g;
}

Benchmark read_benchmark(const fs::path& path) {
  require_file(path);
  try {
    return load_benchmark(path);
  } catch (const BenchmarkError& e) {
    throw UsageError(e.what());
  }
}

int cmd_scale(const RunFlags& f, Manifest& m) {
  set_jobs(f.strategy.jobs);
  m.inputs.push_back(f.benchmark);
  m.outputs = {f.out};
  ensure_distinct(m.inputs, {f.out, manifest_beside(f.out)});
  const ScalingConfig cfg = f.strategy.config(f.limits);
  const Benchmark bench = read_benchmark(f.benchmark);
  Generators g = make_generators(f, cfg.strategy == Strategy::parallel, m);
  m.config = run_config_json(f, cfg);

  std::string lines;
  std::size_t solved = 0, errors = 0, explored = 0;
  Json seeds = Json::object();
  for (const auto& problem : bench.problems) {
    ScalingConfig local = cfg;
    local.seed = problem_seed(cfg.seed, problem.id, grid_point_of(cfg));
    seeds[problem.id] = local.seed;
    Json line;
    try {
      const ScalingResult r = run_strategy(*g.gen, g.judge.get(), problem, local);
      line = to_json(r);
      solved += r.solved;
      explored += r.candidates_explored;
    } catch (const ScalingAborted& e) {
      line = to_json(e.partial());
      line["error"] = e.what();
      ++errors;
      log_line(problem.id + ": " + e.what());
    } catch (const GeneratorError& e) {
      line = Json{{"problem_id", problem.id}, {"error", e.what()}};
      ++errors;
      log_line(problem.id + ": " + e.what());
    }
    lines += line.dump() + "\n";
  }
  make_parent(f.out);
  text::write_file(f.out, lines);
  m.seeds = Json{{"master", cfg.seed}, {"per_problem", seeds}};
  m.summary = Json{{"problems", bench.problems.size()},
                   {"solved", solved},
                   {"errors", errors},
                   {"candidates_explored", explored}};
  std::cout << "solved " << solved << "/" << bench.problems.size() << " (public tests), " << explored
            << " candidates explored\n";
  const int code = solved == bench.problems.size() ? kSuccess : kDomainFailure;
  write_manifest(manifest_beside(f.out), m, code);
  return code;
}

int cmd_evaluate(const RunFlags& f, Manifest& m) {
  set_jobs(f.strategy.jobs);
  const fs::path tsv = f.out / "metrics.tsv";
  const fs::path jsonl = f.out / "metrics.jsonl";
  const fs::path details = f.out / "details.json";
  const fs::path manifest_path = f.out / "manifest.json";
  m.inputs.push_back(f.benchmark);
  m.outputs = {tsv, jsonl, details};
  ensure_distinct(m.inputs, {tsv, jsonl, details, manifest_path});
  const ScalingConfig cfg = f.strategy.config(f.limits);
  const Benchmark bench = read_benchmark(f.benchmark);
  Generators g = make_generators(f, cfg.strategy == Strategy::parallel, m);
  m.config = run_config_json(f, cfg);

  EvalOptions options;
  options.master_seed = cfg.seed;
  options.jobs = f.strategy.jobs;
  options.log = log_line;
  MetricsTable table;
  table.rows.push_back(run_benchmark(*g.gen, g.judge.get(), bench, cfg, options));
  const MetricsRow& row = table.rows.front();

  fs::create_directories(f.out);
  text::write_file(tsv, to_tsv(table));
  text::write_file(jsonl, to_jsonl(table));
  text::write_file(details, to_json(row).dump(2) + "\n");
  Json seeds = Json::object();
  for (const auto& p : bench.problems) seeds[p.id] = problem_seed(cfg.seed, p.id, grid_point_of(cfg));
  m.seeds = Json{{"master", cfg.seed}, {"per_problem", seeds}};
  m.summary = Json{{"pass_at_1", format_hundredths(row.pass_at_1_hundredths)},
                   {"n_problems", row.n_problems},
                   {"errors", row.errors}};
  std::cout << to_tsv(table);
  const int code = row.failed ? kDomainFailure : kSuccess;
  write_manifest(manifest_path, m, code);
  return code;
}

struct SweepFlags {
  RunFlags run;
  std::vector<std::string> strategies;
  std::vector<std::string> representations;
  std::vector<std::size_t> samples;
  std::vector<double> temperatures;
  std::vector<int> rounds;
};

int cmd_sweep(const SweepFlags& s, Manifest& m) {
  const RunFlags& f = s.run;
  set_jobs(f.strategy.jobs);
  const fs::path tsv = f.out / "metrics.tsv";
  const fs::path jsonl = f.out / "metrics.jsonl";
  const fs::path matrix = f.out / "matrix.txt";
  const fs::path manifest_path = f.out / "manifest.json";
  m.inputs.push_back(f.benchmark);
  m.outputs = {tsv, jsonl, matrix};
  ensure_distinct(m.inputs, {tsv, jsonl, matrix, manifest_path});
  const ScalingConfig base = f.strategy.config(f.limits);

  SweepGrid grid;
  for (const auto& name : s.strategies) grid.strategies.push_back(parse_strategy(name));
  for (const auto& tag : s.representations) grid.representations.push_back(parse_representation(tag));
  grid.samples = s.samples;
  grid.temperatures = s.temperatures;
  grid.rounds = s.rounds;
  const auto points = grid.points(base);
  bool need_judge = false;
  for (const auto& p : points) {
    config_at(base, p).validate();
    need_judge = need_judge || p.strategy == Strategy::parallel;
  }
  const Benchmark bench = read_benchmark(f.benchmark);
  Generators g = make_generators(f, need_judge, m);

  m.config = run_config_json(f, base);
  m.config["grid"] = Json{{"strategies", s.strategies},
                          {"representations", s.representations},
                          {"samples", s.samples},
                          {"temperatures", s.temperatures},
                          {"rounds", s.rounds}};
  m.seeds = Json{{"master", base.seed}};

  EvalOptions options;
  options.master_seed = base.seed;
  options.jobs = f.strategy.jobs;
  options.log = log_line;
  const MetricsTable table = sweep(*g.gen, g.judge.get(), bench, grid, base, options);

  fs::create_directories(f.out);
  text::write_file(tsv, to_tsv(table));
  text::write_file(jsonl, to_jsonl(table));
  text::write_file(matrix, to_matrix(table));
  std::size_t failed = 0;
  for (const auto& row : table.rows) failed += row.failed;
  m.summary = Json{{"rows", table.rows.size()}, {"failed_rows", failed}};
  std::cout << to_tsv(table) << "\n" << to_matrix(table);
  const int code = failed == table.rows.size() ? kDomainFailure : kSuccess;
  write_manifest(manifest_path, m, code);
  return code;
}

// ---------------------------------------------------------------------------
// token-stats

struct TokenStatsFlags {
  fs::path input;
  fs::path out;
  bool require_ordering = false;
};

int cmd_token_stats(const TokenStatsFlags& f, Manifest& m) {
  fs::path input = f.input;
  std::error_code ec;
  if (fs::is_directory(input, ec)) input /= "manifest.json";
  require_file(input);
  m.inputs.push_back(input);
  m.outputs = {f.out};
  ensure_distinct(m.inputs, {f.out, manifest_beside(f.out)});
  m.config = Json{{"input", input.string()}, {"require_ordering", f.require_ordering}};

  // A build manifest is one JSON object; anything else is read as records.
  TokenStats stats;
  std::optional<nlohmann::json> whole;
  try {
    whole = nlohmann::json::parse(text::read_file(input));
  } catch (const nlohmann::json::exception&) {
  }
  try {
    if (whole && whole->is_object() && !whole->contains("prompt")) {
      const nlohmann::json& body = whole->contains("summary") ? whole->at("summary") : *whole;
      stats = token_stats_from_manifest(body);
      m.config["format"] = "manifest";
    } else {
      stats = token_stats_from_records(input);
      m.config["format"] = "records";
    }
  } catch (const std::exception& e) {
    throw UsageError("cannot read token statistics from " + input.string() + ": " + e.what());
  }
  make_parent(f.out);
  text::write_file(f.out, to_json(stats).dump(2) + "\n");
  for (const auto& [rep, t] : stats.per_representation) std::cout << rep << "\t" << t.records << "\t" << t.tokens << "\n";
  for (const auto& line : stats.ordering_report) std::cout << line << "\n";
  m.summary = Json{{"ordering_holds", stats.ordering_holds}};
  const int code = f.require_ordering && !stats.ordering_holds ? kDomainFailure : kSuccess;
  write_manifest(manifest_beside(f.out), m, code);
  return code;
}

// ---------------------------------------------------------------------------

// Per-subcommand state for `--config`. Required options are checked after
// the config merge so a manifest's config alone can drive a replay.
struct SubcommandConfig {
  std::string path;
  std::vector<CLI::Option*> required;
};

std::map<CLI::App*, SubcommandConfig> g_configs;

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", g_configs[sub].path, "TOML file of flag values; command-line flags win")
      ->configurable(false);
  return sub;
}

CLI::Option* required(CLI::App* sub, CLI::Option* opt) {
  g_configs[sub].required.push_back(opt);
  return opt;
}

CLI::Option* find_option(CLI::App* sub, const std::string& key) {
  if (CLI::Option* op = sub->get_option_no_throw("--" + key)) return op;
  if (key.size() == 1) {
    if (CLI::Option* op = sub->get_option_no_throw("-" + key)) return op;
  }
  return sub->get_option_no_throw(key);
}

// Fills options not given on the command line from the TOML file.
void apply_config(CLI::App* sub) {
  const SubcommandConfig& sc = g_configs[sub];
  if (!sc.path.empty()) {
    require_file(sc.path);
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigTOML().from_file(sc.path);
    } catch (const CLI::Error& e) {
      throw UsageError("cannot parse config " + sc.path + ": " + e.what());
    }
    for (const auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;
      if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) {
        throw UsageError("config key " + item.fullname() + " does not belong to " + sub->get_name());
      }
      CLI::Option* op = find_option(sub, item.name);
      if (op == nullptr || !op->get_configurable()) {
        throw UsageError("unknown config key '" + item.name + "' for " + sub->get_name());
      }
      if (op->count() > 0) continue;
      try {
        op->add_result(item.inputs);
        op->run_callback();
      } catch (const CLI::Error& e) {
        throw UsageError("config key '" + item.name + "': " + e.what());
      }
    }
  }
  for (CLI::Option* op : sc.required) {
    if (op->count() == 0) throw UsageError(op->get_name() + " is required");
  }
}

void add_run_flags(CLI::App* sub, RunFlags& f, const std::string& out_help) {
  required(sub, sub->add_option("benchmark", f.benchmark, "Benchmark file (JSONL)"));
  required(sub, sub->add_option("-o,--out", f.out, out_help));
  f.strategy.add(sub);
  f.limits.add(sub);
  f.backend.add(sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Execution traces for code generation: capture, render, build datasets, scale and evaluate."};
  app.set_version_flag("--version", TRACESCALE_VERSION);
  app.require_subcommand(1);

  Manifest manifest;
  for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);
  std::function<int()> command;

  TraceFlags trace;
  {
    CLI::App* sub = subcommand(app, "trace", "Run a Python program under the tracer and write its raw trace");
    required(sub, sub->add_option("source", trace.source, "Python source file"));
    auto* inv = sub->add_option("--invocation", trace.invocation, "Expression to evaluate, e.g. 'f(3)'");
    sub->add_option("--stdin", trace.stdin_path, "Run as a script with this file on stdin")->excludes(inv);
    required(sub, sub->add_option("-o,--out", trace.out, "Output trace (JSONL)"));
    sub->add_option("--seed", trace.seed, "Seed for the program's random module")->capture_default_str();
    trace.limits.add(sub);
    sub->callback([&] { command = [&] { return cmd_trace(trace, manifest); }; });
  }

  RenderFlags render;
  {
    CLI::App* sub = subcommand(app, "render", "Render a raw trace under one representation");
    required(sub, sub->add_option("trace", render.trace, "Trace file written by 'trace'"));
    required(sub, sub->add_option("-r,--representation", render.representation, "Representation tag"));
    sub->add_option("--source", render.source, "Source of the traced program");
    required(sub, sub->add_option("-o,--out", render.out, "Output file (JSON)"));
    render.backend.add(sub);
    sub->callback([&] { command = [&] { return cmd_render(render, manifest); }; });
  }

  BuildFlags build;
  {
    CLI::App* sub = subcommand(app, "build-dataset", "Mine repair pairs and write SFT records");
    required(sub, sub->add_option("pools", build.pools, "Solution pool file (JSONL)"));
    sub->add_option("--representations", build.representations, "Comma-separated representation tags")
        ->delimiter(',')
        ->check(CLI::IsMember(representation_names()));
    sub->add_option("--modes", build.modes, "Comma-separated record modes")
        ->delimiter(',')
        ->check(CLI::IsMember({"rationale_in_input", "rationale_in_output"}));
    sub->add_option("--decontaminate", build.corpus, "Benchmark corpus to decontaminate against (JSONL)");
    required(sub, sub->add_option("-o,--out-dir", build.out_dir, "Output directory"));
    sub->add_option("--threshold", build.threshold, "Similarity threshold for pairing")->capture_default_str();
    sub->add_option("--budget", build.budget, "Token budget per record")->capture_default_str();
    sub->add_option("--seed", build.seed, "Seed")->capture_default_str();
    sub->add_option("--jobs", build.jobs, "Concurrent subject processes")->capture_default_str();
    sub->add_flag("--no-docstring-filter", build.no_docstring_filter, "Keep records with weak docstrings");
    sub->add_flag("--no-verify", build.no_verify, "Skip the final sandbox re-verification");
    build.limits.add(sub);
    build.backend.add(sub);
    sub->callback([&] { command = [&] { return cmd_build_dataset(build, manifest); }; });
  }

  RunFlags scale;
  {
    CLI::App* sub = subcommand(app, "scale", "Run a test-time scaling strategy on every benchmark problem");
    add_run_flags(sub, scale, "Output results (JSONL)");
    sub->callback([&] { command = [&] { return cmd_scale(scale, manifest); }; });
  }

  RunFlags evaluate;
  {
    CLI::App* sub = subcommand(app, "evaluate", "Score one configuration on the private tests");
    add_run_flags(sub, evaluate, "Output directory");
    sub->callback([&] { command = [&] { return cmd_evaluate(evaluate, manifest); }; });
  }

  SweepFlags sweep_flags;
  {
    CLI::App* sub = subcommand(app, "sweep", "Evaluate every point of a hyperparameter grid");
    add_run_flags(sub, sweep_flags.run, "Output directory");
    sub->add_option("--grid-strategies", sweep_flags.strategies, "Comma-separated strategies")
        ->delimiter(',')
        ->check(CLI::IsMember(kStrategyNames));
    sub->add_option("--grid-representations", sweep_flags.representations, "Comma-separated representations")
        ->delimiter(',')
        ->check(CLI::IsMember(representation_names()));
    sub->add_option("--grid-samples", sweep_flags.samples, "Comma-separated sample counts")->delimiter(',');
    sub->add_option("--grid-temperatures", sweep_flags.temperatures, "Comma-separated temperatures")->delimiter(',');
    sub->add_option("--grid-rounds", sweep_flags.rounds, "Comma-separated round budgets")->delimiter(',');
    sub->callback([&] { command = [&] { return cmd_sweep(sweep_flags, manifest); }; });
  }

  TokenStatsFlags token_stats;
  {
    CLI::App* sub = subcommand(app, "token-stats", "Token totals per representation of a built dataset");
    required(sub, sub->add_option("input", token_stats.input, "Dataset directory, build manifest or records file"));
    required(sub, sub->add_option("-o,--out", token_stats.out, "Output file (JSON)"));
    sub->add_flag("--require-ordering", token_stats.require_ordering, "Exit 1 when the size ordering fails");
    sub->callback([&] { command = [&] { return cmd_token_stats(token_stats, manifest); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      apply_config(sub);
      manifest.command = sub->get_name();
      manifest.config_toml = sub->config_to_str(true, false);
    }
    return command();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kUsageError;
}
