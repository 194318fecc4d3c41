// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/trace_adapters.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <stdexcept>

#include "tracescale/text.hpp"

namespace tracescale {

std::string_view to_string(TraceRepresentation rep) {
  switch (rep) {
    case TraceRepresentation::none: return "none";
    case TraceRepresentation::next: return "next";
    case TraceRepresentation::code_executor: return "code_executor";
    case TraceRepresentation::concise: return "concise";
    case TraceRepresentation::semcoder_template: return "semcoder_template";
    case TraceRepresentation::semcoder_llm: return "semcoder_llm";
    case TraceRepresentation::scratchpad: return "scratchpad";
  }
  return "none";
}

TraceRepresentation parse_representation(std::string_view tag) {
  for (auto rep : kAllRepresentations) {
    if (to_string(rep) == tag) return rep;
  }
  throw std::invalid_argument("unknown trace representation: " + std::string(tag));
}

RenderedTrace make_rendered(TraceRepresentation rep, std::string text, const Tokenizer& tokenizer) {
  RenderedTrace r;
  r.representation = rep;
  r.token_count = tokenizer.count(text);
  r.text = std::move(text);
  return r;
}

namespace {

void require_events(const RawTrace& trace, const char* who) {
  if (trace.events.empty()) throw std::invalid_argument(std::string(who) + ": trace has no events");
}

std::string display_name(std::string_view name) {
  if (name == kReturnBinding) return "return";
  if (name == kExceptionBinding) return "exception";
  return std::string(name);
}

bool reserved(std::string_view name) { return name == kReturnBinding || name == kExceptionBinding; }

std::string one_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

std::string state_list(const Bindings& b, const std::vector<std::string>* only) {
  std::vector<std::string> parts;
  for (const auto& [name, value] : b) {
    if (only && std::find(only->begin(), only->end(), name) == only->end()) continue;
    parts.push_back(display_name(name) + "=" + value);
  }
  return text::join(parts, ", ");
}

std::string per_line_block(const RawTrace& trace, bool changed_only) {
  std::vector<std::string> rows;
  for (const auto& e : trace.events) {
    if (e.kind != EventKind::line) continue;
    const std::string state = state_list(e.bindings, changed_only ? &e.changed : nullptr);
    rows.push_back(std::to_string(e.line) + ":" + (state.empty() ? "" : " " + state));
  }
  return text::join(rows, "\n");
}

// Lines of `source` with their byte ranges, trailing '\r' excluded from the
// content range so adapter comments land before it.
struct LineSpan {
  std::size_t begin;
  std::size_t content_end;
};

std::vector<LineSpan> line_spans(std::string_view source) {
  std::vector<LineSpan> out;
  std::size_t start = 0;
  while (start < source.size()) {
    auto nl = source.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? source.size() : nl;
    std::size_t content_end = end;
    if (content_end > start && source[content_end - 1] == '\r') --content_end;
    out.push_back({start, content_end});
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// NExT

RenderedTrace to_next(std::string_view source, const RawTrace& trace, const Tokenizer& tokenizer) {
  require_events(trace, "to_next");
  if (text::contains(source, "# [trace]")) {
    throw std::invalid_argument("to_next: source already contains the adapter comment marker");
  }
  const auto spans = line_spans(source);
  struct Chain {
    std::string name;
    std::vector<std::string> values;
  };
  std::map<int, std::vector<Chain>> per_line;
  std::map<int, bool> executed;
  for (const auto& e : trace.events) {
    if (e.line < 1 || static_cast<std::size_t>(e.line) > spans.size()) {
      throw std::invalid_argument("to_next: trace line " + std::to_string(e.line) + " is outside the source");
    }
    executed[e.line] = true;
    auto& chains = per_line[e.line];
    for (const auto& name : e.changed) {
      const bool is_reserved = reserved(name);
      if (e.kind == EventKind::return_ && name != kReturnBinding) continue;
      if (e.kind == EventKind::exception && name != kExceptionBinding) continue;
      if ((e.kind == EventKind::line || e.kind == EventKind::call) && is_reserved) continue;
      const std::string display = display_name(name);
      auto it = std::find_if(chains.begin(), chains.end(), [&](const Chain& c) { return c.name == display; });
      if (it == chains.end()) {
        chains.push_back({display, {}});
        it = std::prev(chains.end());
      }
      it->values.push_back(one_line(*e.bindings.find(name)));
    }
  }

  std::string out;
  out.reserve(source.size() * 2);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    if (!executed.count(line)) continue;
    std::vector<std::string> parts;
    for (const auto& c : per_line[line]) {
      std::string chain = c.name + "=";
      const std::size_t shown = std::min(c.values.size(), kNextMaxTransitions + 1);
      for (std::size_t k = 0; k < shown; ++k) {
        if (k) chain += " → ";
        chain += c.values[k];
      }
      if (c.values.size() > shown) chain += " → " + std::string(kEllipsis);
      parts.push_back(std::move(chain));
    }
    const std::string comment = std::string(kNextMarker) + (parts.empty() ? "(no change)" : text::join(parts, "; "));
    out.append(source.substr(cursor, spans[i].content_end - cursor));
    out.append(comment);
    cursor = spans[i].content_end;
  }
  out.append(source.substr(cursor));
  return make_rendered(TraceRepresentation::next, std::move(out), tokenizer);
}

std::string strip_annotations(std::string_view annotated) {
  std::string out;
  out.reserve(annotated.size());
  std::size_t cursor = 0;
  for (const auto& span : line_spans(annotated)) {
    const auto line = annotated.substr(span.begin, span.content_end - span.begin);
    const auto pos = line.find(kNextMarker);
    if (pos == std::string_view::npos) continue;
    out.append(annotated.substr(cursor, span.begin + pos - cursor));
    cursor = span.content_end;
  }
  out.append(annotated.substr(cursor));
  return out;
}

// ---------------------------------------------------------------------------
// Separated-state representations

RenderedTrace to_code_executor(const RawTrace& trace, const Tokenizer& tokenizer) {
  require_events(trace, "to_code_executor");
  return make_rendered(TraceRepresentation::code_executor, per_line_block(trace, false), tokenizer);
}

RenderedTrace to_concise(const RawTrace& trace, const Tokenizer& tokenizer) {
  require_events(trace, "to_concise");
  return make_rendered(TraceRepresentation::concise, per_line_block(trace, true), tokenizer);
}

RenderedTrace to_scratchpad(const RawTrace& trace, const Tokenizer& tokenizer) {
  require_events(trace, "to_scratchpad");
  std::vector<std::string> rows;
  for (const auto& e : trace.events) {
    const std::string state = state_list(e.bindings, nullptr);
    rows.push_back(state.empty() ? "(no bindings)" : state);
  }
  return make_rendered(TraceRepresentation::scratchpad, text::join(rows, "\n"), tokenizer);
}

// ---------------------------------------------------------------------------
// SemCoder-style natural language

namespace {

std::vector<std::string> split_top_level(std::string_view inner, char sep) {
  std::vector<std::string> items;
  int depth = 0;
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const char c = inner[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '[' || c == '(' || c == '{') {
      ++depth;
    } else if (c == ']' || c == ')' || c == '}') {
      --depth;
    } else if (c == sep && depth == 0) {
      items.push_back(text::collapse_whitespace(inner.substr(start, i - start)));
      start = i + 1;
    }
  }
  const auto last = text::collapse_whitespace(inner.substr(start));
  if (!last.empty()) items.push_back(last);
  return items;
}

std::vector<std::string> top_level_items(std::string_view inner) { return split_top_level(inner, ','); }

std::string plural_of(const std::string& singular) {
  static const std::map<std::string, std::string> kPlural = {
      {"an integer", "integers"}, {"a float", "floats"},   {"a string", "strings"},
      {"a boolean", "booleans"},  {"a list", "lists"},     {"a tuple", "tuples"},
      {"a dict", "dicts"},        {"a set", "sets"},       {"None", "None values"},
      {"bytes", "bytes values"}};
  auto it = kPlural.find(singular);
  return it == kPlural.end() ? "values" : it->second;
}

std::string container_type(const std::string& base, std::string_view inner, bool is_dict) {
  auto items = top_level_items(inner);
  items.erase(std::remove(items.begin(), items.end(), std::string(kEllipsis)), items.end());
  if (items.empty()) return "an empty " + base.substr(base.find(' ') + 1);
  std::string kind;
  for (const auto& item : items) {
    std::string elem = item;
    if (is_dict) {
      const auto kv = split_top_level(item, ':');
      if (kv.size() >= 2) elem = kv[1];
    }
    std::string t = describe_rendered_type(elem);
    if (t.rfind("a list", 0) == 0) t = "a list";
    if (t.rfind("a tuple", 0) == 0) t = "a tuple";
    if (t.rfind("a dict", 0) == 0) t = "a dict";
    if (t.rfind("a set", 0) == 0) t = "a set";
    if (t.rfind("an empty", 0) == 0) t = "a " + t.substr(9);
    if (kind.empty()) {
      kind = t;
    } else if (kind != t) {
      return base + " of mixed values";
    }
  }
  return base + (is_dict ? " mapping to " : " of ") + plural_of(kind);
}

}  // namespace

std::string describe_rendered_type(std::string_view v) {
  static const std::regex kInt(R"(-?\d+)");
  static const std::regex kFloat(R"(-?(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?|-?inf|nan)");
  const std::string s(v);
  if (s == "None") return "None";
  if (s == "True" || s == "False") return "a boolean";
  if (std::regex_match(s, kInt)) return "an integer";
  if (std::regex_match(s, kFloat)) return "a float";
  if (!s.empty() && (s.front() == '\'' || s.front() == '"')) return "a string";
  if (s.rfind("b'", 0) == 0 || s.rfind("b\"", 0) == 0) return "bytes";
  if (s == "set()") return "an empty set";
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    return container_type("a list", std::string_view(s).substr(1, s.size() - 2), false);
  }
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    return container_type("a tuple", std::string_view(s).substr(1, s.size() - 2), false);
  }
  if (s.size() >= 2 && s.front() == '{' && s.back() == '}') {
    const auto inner = std::string_view(s).substr(1, s.size() - 2);
    const auto items = top_level_items(inner);
    const bool is_dict = items.empty() || split_top_level(items.front(), ':').size() >= 2;
    return container_type(is_dict ? "a dict" : "a set", inner, is_dict);
  }
  if (s.rfind("<function ", 0) == 0) return "a function";
  return "an object";
}

namespace {

std::string source_line(const std::vector<std::string_view>& lines, int line) {
  if (line < 1 || static_cast<std::size_t>(line) > lines.size()) return {};
  return text::collapse_whitespace(lines[static_cast<std::size_t>(line) - 1]);
}

struct Signature {
  std::string name;
  std::string text;
};

Signature signature_at(const std::vector<std::string_view>& lines, int line) {
  static const std::regex kDef(R"(^\s*(?:async\s+)?def\s+([A-Za-z_]\w*)\s*\((.*?)\)?\s*(?:->.*)?:?\s*$)");
  const std::string l = source_line(lines, line);
  std::smatch m;
  if (std::regex_match(l, m, kDef)) return {m[1].str(), m[1].str() + "(" + m[2].str() + ")"};
  return {};
}

std::string changes_clause(const TraceEvent& e) {
  std::vector<std::string> parts;
  for (const auto& name : e.changed) {
    if (reserved(name)) continue;
    parts.push_back("`" + name + "` becomes " + *e.bindings.find(name));
  }
  if (parts.empty()) return "with no variable changes";
  if (parts.size() == 1) return "and " + parts.front();
  std::string last = parts.back();
  parts.pop_back();
  return "and " + text::join(parts, ", ") + " and " + last;
}

std::string template_sentences(std::string_view source, const RawTrace& trace) {
  const auto lines = text::split_lines(source);
  std::vector<std::string> out;
  std::vector<std::string> stack;
  for (const auto& e : trace.events) {
    switch (e.kind) {
      case EventKind::call: {
        const Signature sig = signature_at(lines, e.line);
        const std::string fname = sig.name.empty() ? "<module>" : sig.name;
        stack.push_back(fname);
        std::string s;
        if (sig.name.empty()) {
          s = "Execution enters the code at line " + std::to_string(e.line);
        } else {
          s = "The function `" + sig.text + "` is called";
        }
        if (e.bindings.empty()) {
          s += " with no arguments.";
        } else {
          std::vector<std::string> args, types;
          for (const auto& [name, value] : e.bindings) {
            args.push_back("`" + name + "` = " + value);
            types.push_back("`" + name + "` is " + describe_rendered_type(value));
          }
          s += " with " + text::join(args, ", ") + "; " + text::join(types, ", ") + ".";
        }
        out.push_back(std::move(s));
        break;
      }
      case EventKind::line:
        out.push_back("Line " + std::to_string(e.line) + " `" + source_line(lines, e.line) + "` executes " +
                      changes_clause(e) + ".");
        break;
      case EventKind::return_: {
        const std::string fname = stack.empty() ? "<module>" : stack.back();
        if (!stack.empty()) stack.pop_back();
        const std::string* value = e.bindings.find(kReturnBinding);
        out.push_back("The function `" + fname + "` returns " + (value ? *value : std::string("None")) + ".");
        break;
      }
      case EventKind::exception: {
        const std::string* value = e.bindings.find(kExceptionBinding);
        out.push_back("Line " + std::to_string(e.line) + " raises " + (value ? *value : std::string("an exception")) +
                      ".");
        break;
      }
    }
  }
  if (trace.status.kind == RunKind::raised) {
    out.push_back("Execution stops with the uncaught exception " + trace.status.detail + ".");
  } else if (trace.status.kind == RunKind::timed_out) {
    out.push_back("Execution is stopped after exceeding its time limit.");
  } else if (trace.truncated) {
    out.push_back("The trace is cut off after " + std::to_string(trace.events.size()) + " steps.");
  }
  return text::join(out, "\n");
}

}  // namespace

RenderedTrace to_semcoder(std::string_view source, const RawTrace& trace, Generator* generator,
                          const Tokenizer& tokenizer) {
  require_events(trace, "to_semcoder");
  std::string templ = template_sentences(source, trace);
  if (generator == nullptr) return make_rendered(TraceRepresentation::semcoder_template, std::move(templ), tokenizer);

  std::string prompt =
      "Explain, line by line, how the following Python program executes. Describe the function "
      "signature and argument types, every variable change, and the relationship between inputs and "
      "the output, as a natural-language monologue.\n\n```python\n" +
      std::string(source) + (source.empty() || source.back() == '\n' ? "" : "\n") +
      "```\n\nRecorded state per executed line:\n" + per_line_block(trace, false) +
      "\n\nDraft explanation:\n" + templ + "\n";
  auto replies = generator->generate({std::move(prompt), 0.0, 1, 0});
  return make_rendered(TraceRepresentation::semcoder_llm, std::move(replies.front()), tokenizer);
}

RenderedTrace render_trace(TraceRepresentation rep, std::string_view source, const RawTrace& trace,
                           Generator* generator, const Tokenizer& tokenizer) {
  switch (rep) {
    case TraceRepresentation::none: return make_rendered(rep, {}, tokenizer);
    case TraceRepresentation::next: return to_next(source, trace, tokenizer);
    case TraceRepresentation::code_executor: return to_code_executor(trace, tokenizer);
    case TraceRepresentation::concise: return to_concise(trace, tokenizer);
    case TraceRepresentation::semcoder_template: return to_semcoder(source, trace, nullptr, tokenizer);
    case TraceRepresentation::semcoder_llm:
      if (generator == nullptr) throw std::invalid_argument("semcoder_llm needs a generator");
      return to_semcoder(source, trace, generator, tokenizer);
    case TraceRepresentation::scratchpad: return to_scratchpad(trace, tokenizer);
  }
  throw std::invalid_argument("unhandled representation");
}

}  // namespace tracescale
