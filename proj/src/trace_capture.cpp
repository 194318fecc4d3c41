// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/trace_capture.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "internal/tracer_script.hpp"
#include "tracescale/process.hpp"
#include "tracescale/text.hpp"

namespace tracescale {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::call: return "call";
    case EventKind::line: return "line";
    case EventKind::return_: return "return";
    case EventKind::exception: return "exception";
  }
  return "line";
}

EventKind parse_event_kind(std::string_view s) {
  if (s == "call") return EventKind::call;
  if (s == "line") return EventKind::line;
  if (s == "return") return EventKind::return_;
  if (s == "exception") return EventKind::exception;
  throw std::invalid_argument("unknown event kind: " + std::string(s));
}

std::string_view to_string(RunKind kind) {
  switch (kind) {
    case RunKind::completed: return "completed";
    case RunKind::raised: return "raised";
    case RunKind::timed_out: return "timed_out";
    case RunKind::syntax_error: return "syntax_error";
  }
  return "completed";
}

RunKind parse_run_kind(std::string_view s) {
  if (s == "completed") return RunKind::completed;
  if (s == "raised") return RunKind::raised;
  if (s == "timed_out") return RunKind::timed_out;
  if (s == "syntax_error") return RunKind::syntax_error;
  throw std::invalid_argument("unknown run status: " + std::string(s));
}

Bindings::Bindings(std::initializer_list<Entry> entries) {
  for (const auto& [name, value] : entries) set(name, value);
}

const std::string* Bindings::find(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return &v;
  }
  return nullptr;
}

void Bindings::set(std::string name, std::string value) {
  for (auto& [n, v] : entries_) {
    if (n == name) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(name), std::move(value));
}

void Limits::validate() const {
  if (max_steps == 0 || !(max_wall_time > 0.0) || max_render_bytes == 0 || max_value_width == 0 ||
      max_container_elements == 0) {
    throw std::invalid_argument("trace limits must all be strictly positive");
  }
}

std::vector<int> RawTrace::covered_lines() const {
  std::set<int> lines;
  for (const auto& e : events) {
    if (e.kind == EventKind::line) lines.insert(e.line);
  }
  return {lines.begin(), lines.end()};
}

std::vector<std::string> diff_states(const Bindings& prev, const Bindings& next) {
  std::vector<std::string> out;
  for (const auto& [name, value] : next) {
    const std::string* old = prev.find(name);
    if (old == nullptr || *old != value) out.push_back(name);
  }
  return out;
}

void recompute_changes(std::vector<TraceEvent>& events) {
  static const Bindings kEmpty;
  for (std::size_t i = 0; i < events.size(); ++i) {
    events[i].step = i;
    events[i].changed = diff_states(i == 0 ? kEmpty : events[i - 1].bindings, events[i].bindings);
  }
}

namespace {

std::string python_executable() {
  if (const char* p = std::getenv("TRACESCALE_PYTHON"); p != nullptr && *p != '\0') return p;
  return "python3";
}

ordered_json limits_json(const Limits& l) {
  return ordered_json{{"max_steps", l.max_steps},
                      {"max_render_bytes", l.max_render_bytes},
                      {"max_value_width", l.max_value_width},
                      {"max_container_elements", l.max_container_elements},
                      {"max_wall_time", l.max_wall_time}};
}

ProcessResult launch(const ordered_json& request, const Limits& limits, std::size_t memory_bytes) {
  const std::vector<std::string> argv = {python_executable(), "-I", "-S", "-c",
                                         std::string(detail::tracer_script())};
  std::vector<std::string> env = {"PYTHONHASHSEED=0", "PYTHONIOENCODING=utf-8", "LC_ALL=C.UTF-8"};
  if (const char* path = std::getenv("PATH")) env.push_back(std::string("PATH=") + path);
  ProcessLimits pl;
  // Interpreter start-up is not charged against the subject's wall budget.
  pl.wall_seconds = limits.max_wall_time + 2.0;
  pl.memory_bytes = memory_bytes;
  return run_process(argv, env, request.dump(), pl);
}

Bindings bindings_from_pairs(const nlohmann::json& pairs) {
  Bindings b;
  for (const auto& p : pairs) b.set(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return b;
}

RawTrace trace_from_response(const ProcessResult& proc) {
  RawTrace trace;
  trace.wall_time = proc.wall_seconds;
  const auto line_end = proc.channel_text.find('\n');
  if (proc.channel_text.empty() || line_end == std::string::npos) {
    if (proc.killed_on_deadline || proc.term_signal == SIGXCPU || proc.term_signal == SIGKILL) {
      trace.status = {RunKind::timed_out, ""};
    } else {
      trace.status = {RunKind::raised, "HarnessError: interpreter exited with code " +
                                           std::to_string(proc.exit_code) + " signal " +
                                           std::to_string(proc.term_signal)};
    }
    trace.stderr_text = proc.stderr_text;
    return trace;
  }
  const auto j = nlohmann::json::parse(proc.channel_text.substr(0, line_end));
  trace.status.kind = parse_run_kind(j.at("status").get<std::string>());
  trace.status.detail = j.value("detail", "");
  if (trace.status.kind == RunKind::raised && trace.status.detail.empty()) {
    trace.status.detail = "Exception";
  }
  trace.stdout_text = j.value("stdout", "");
  trace.stderr_text = j.value("stderr", "");
  trace.truncated = j.value("truncated", false);
  trace.wall_time = j.value("wall_time", proc.wall_seconds);
  if (j.contains("result") && j["result"].is_string()) trace.result = j["result"].get<std::string>();
  for (const auto& e : j.at("events")) {
    TraceEvent ev;
    ev.line = e.at("line").get<int>();
    ev.kind = parse_event_kind(e.at("kind").get<std::string>());
    ev.bindings = bindings_from_pairs(e.at("bindings"));
    trace.events.push_back(std::move(ev));
  }
  recompute_changes(trace.events);
  if (trace.status.kind == RunKind::syntax_error) trace.events.clear();
  return trace;
}

}  // namespace

RawTrace run_subject(const RunRequest& request) {
  request.limits.validate();
  ordered_json req{{"mode", request.stdin_text ? "script" : "invoke"},
                   {"source", request.source},
                   {"invocation", request.invocation},
                   {"trace", request.trace},
                   {"limits", limits_json(request.limits)},
                   {"seed", request.seed}};
  if (request.stdin_text) req["stdin"] = *request.stdin_text;
  return trace_from_response(launch(req, request.limits, request.memory_limit_bytes));
}

RawTrace run_traced(std::string_view source, std::string_view invocation, const Limits& limits) {
  if (source.empty()) throw std::invalid_argument("run_traced: empty source");
  RunRequest req;
  req.source = std::string(source);
  req.invocation = std::string(invocation);
  req.limits = limits;
  return run_subject(req);
}

std::string render_value(std::string_view expression, const Limits& limits, std::string_view setup) {
  limits.validate();
  ordered_json req{{"mode", "render"},
                   {"source", std::string(setup)},
                   {"invocation", std::string(expression)},
                   {"trace", false},
                   {"limits", limits_json(limits)},
                   {"seed", 0}};
  const RawTrace t = trace_from_response(launch(req, limits, std::size_t{512} << 20));
  if (t.status.kind != RunKind::completed || !t.result) {
    // An expression that cannot be evaluated has no value to render.
    return std::string(kUnrepresentable);
  }
  return *t.result;
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_trace(const RawTrace& trace) {
  ordered_json header{{"status", to_string(trace.status.kind)},
                      {"detail", trace.status.detail},
                      {"stdout", trace.stdout_text},
                      {"stderr", trace.stderr_text},
                      {"wall_time", trace.wall_time},
                      {"truncated", trace.truncated}};
  header["result"] = trace.result ? ordered_json(*trace.result) : ordered_json(nullptr);
  std::string out = header.dump() + "\n";
  for (const auto& e : trace.events) {
    ordered_json bindings = ordered_json::object();
    for (const auto& [name, value] : e.bindings) bindings[name] = value;
    ordered_json rec{{"step", e.step},
                     {"line", e.line},
                     {"kind", to_string(e.kind)},
                     {"bindings", bindings},
                     {"changed", e.changed}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

RawTrace parse_trace(std::string_view jsonl) {
  const auto lines = text::split_lines(jsonl);
  if (lines.empty()) throw std::invalid_argument("trace file has no header record");
  RawTrace t;
  const auto header = ordered_json::parse(lines.front());
  t.status.kind = parse_run_kind(header.at("status").get<std::string>());
  t.status.detail = header.value("detail", "");
  t.stdout_text = header.value("stdout", "");
  t.stderr_text = header.value("stderr", "");
  t.wall_time = header.value("wall_time", 0.0);
  t.truncated = header.value("truncated", false);
  if (header.contains("result") && header["result"].is_string()) t.result = header["result"].get<std::string>();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto rec = ordered_json::parse(lines[i]);
    TraceEvent e;
    e.step = rec.at("step").get<std::size_t>();
    e.line = rec.at("line").get<int>();
    e.kind = parse_event_kind(rec.at("kind").get<std::string>());
    for (const auto& [name, value] : rec.at("bindings").items()) e.bindings.set(name, value.get<std::string>());
    e.changed = rec.at("changed").get<std::vector<std::string>>();
    if (e.step != t.events.size()) throw std::invalid_argument("trace steps are not contiguous");
    t.events.push_back(std::move(e));
  }
  return t;
}

}  // namespace tracescale
