// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Line-level execution traces of Python subject programs.
//
// A subject runs in a child Python interpreter under its native per-line
// trace hook (sys.settrace). Every event carries the innermost frame's local
// bindings *after* the step executed, rendered to strings inside the child.
// Globals are included only for names the frame's code assigns to.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tracescale {

/// Marker appended to clipped strings and elided containers.
inline constexpr std::string_view kEllipsis = "…";
/// Rendering of values whose repr raised.
inline constexpr std::string_view kUnrepresentable = "<unrepresentable>";
/// Binding names reserved for return values and raised exceptions.
inline constexpr std::string_view kReturnBinding = "__return__";
inline constexpr std::string_view kExceptionBinding = "__exception__";

enum class EventKind { call, line, return_, exception };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view s);

/// Insertion-ordered name -> rendered-value map.
class Bindings {
 public:
  using Entry = std::pair<std::string, std::string>;

  Bindings() = default;
  Bindings(std::initializer_list<Entry> entries);

  const std::string* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  /// Overwrites in place when present, appends otherwise.
  void set(std::string name, std::string value);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const Bindings&, const Bindings&) = default;

 private:
  std::vector<Entry> entries_;
};

struct TraceEvent {
  std::size_t step = 0;
  int line = 0;
  EventKind kind = EventKind::line;
  Bindings bindings;
  std::vector<std::string> changed;  // binding order

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

enum class RunKind { completed, raised, timed_out, syntax_error };

std::string_view to_string(RunKind kind);
RunKind parse_run_kind(std::string_view s);

struct RunStatus {
  RunKind kind = RunKind::completed;
  std::string detail;  // "<ExceptionType>: <message>" for raised and syntax_error

  friend bool operator==(const RunStatus&, const RunStatus&) = default;
};

struct Limits {
  std::size_t max_steps = 1000;
  double max_wall_time = 10.0;
  std::size_t max_render_bytes = 64 * 1024;
  std::size_t max_value_width = 120;
  std::size_t max_container_elements = 20;

  /// Throws std::invalid_argument unless every field is strictly positive.
  void validate() const;

  friend bool operator==(const Limits&, const Limits&) = default;
};

struct RawTrace {
  std::vector<TraceEvent> events;
  std::string stdout_text;
  std::string stderr_text;
  RunStatus status;
  double wall_time = 0.0;
  bool truncated = false;
  /// repr() of the invocation's value; absent for script runs and failures.
  std::optional<std::string> result;

  /// Lines of every line-kind event, ascending and deduplicated.
  std::vector<int> covered_lines() const;
};

/// Full description of one child run. `stdin_text` switches to script mode:
/// the source runs as __main__ with that stdin and the invocation is ignored.
struct RunRequest {
  std::string source;
  std::string invocation;
  std::optional<std::string> stdin_text;
  bool trace = true;
  Limits limits;
  std::uint64_t seed = 0;
  std::size_t memory_limit_bytes = std::size_t{512} << 20;
};

/// Names in `next` that are absent from `prev` or bound to a different
/// rendering. Names only in `prev` are ignored.
std::vector<std::string> diff_states(const Bindings& prev, const Bindings& next);

/// Fills step ordinals and changed sets from the bindings sequence.
void recompute_changes(std::vector<TraceEvent>& events);

RawTrace run_subject(const RunRequest& request);

/// Evaluates `invocation` against `source` under the trace hook.
RawTrace run_traced(std::string_view source, std::string_view invocation, const Limits& limits = {});

/// Renders the value of a Python expression the way trace bindings are
/// rendered. `setup` is executed first and may define names the
/// expression uses.
std::string render_value(std::string_view expression, const Limits& limits = {},
                         std::string_view setup = {});

/// Line-delimited record form: a header record, then one record per event.
std::string serialize_trace(const RawTrace& trace);
RawTrace parse_trace(std::string_view jsonl);

}  // namespace tracescale
