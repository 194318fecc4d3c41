// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

// Renderings of a RawTrace under the supported trace representations.
//
//   none               empty text (the no-trace baseline)
//   next               source with per-line inline comments
//   code_executor      "<line>: name=value, ..." with the full state per line event
//   concise            code_executor restricted to changed names
//   semcoder_template  fixed natural-language sentences
//   semcoder_llm       template + raw state handed to a generator, verbatim reply
//   scratchpad         full state after every step, no line numbers

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "tracescale/generator.hpp"
#include "tracescale/tokenizer.hpp"
#include "tracescale/trace_capture.hpp"

namespace tracescale {

enum class TraceRepresentation { none, next, code_executor, concise, semcoder_template, semcoder_llm, scratchpad };

inline constexpr std::array<TraceRepresentation, 7> kAllRepresentations = {
    TraceRepresentation::none,       TraceRepresentation::next,
    TraceRepresentation::code_executor,
    TraceRepresentation::concise,    TraceRepresentation::semcoder_template,
    TraceRepresentation::semcoder_llm, TraceRepresentation::scratchpad};

std::string_view to_string(TraceRepresentation rep);
/// Throws std::invalid_argument for anything but the exact lowercase tags.
TraceRepresentation parse_representation(std::string_view tag);

struct RenderedTrace {
  TraceRepresentation representation = TraceRepresentation::none;
  std::string text;
  std::size_t token_count = 0;

  friend bool operator==(const RenderedTrace&, const RenderedTrace&) = default;
};

RenderedTrace make_rendered(TraceRepresentation rep, std::string text,
                            const Tokenizer& tokenizer = default_tokenizer());

/// Comment prefix that distinguishes adapter comments from the author's.
inline constexpr std::string_view kNextMarker = "  # [trace] ";
/// Longest value chain a NExT comment shows per name before eliding.
inline constexpr std::size_t kNextMaxTransitions = 8;

RenderedTrace to_next(std::string_view source, const RawTrace& trace,
                      const Tokenizer& tokenizer = default_tokenizer());
std::string strip_annotations(std::string_view annotated);

RenderedTrace to_code_executor(const RawTrace& trace, const Tokenizer& tokenizer = default_tokenizer());
RenderedTrace to_concise(const RawTrace& trace, const Tokenizer& tokenizer = default_tokenizer());
RenderedTrace to_scratchpad(const RawTrace& trace, const Tokenizer& tokenizer = default_tokenizer());

/// Template mode when `generator` is null, LLM mode otherwise.
RenderedTrace to_semcoder(std::string_view source, const RawTrace& trace, Generator* generator = nullptr,
                          const Tokenizer& tokenizer = default_tokenizer());

/// Dispatches on `rep`. semcoder_llm requires a generator.
RenderedTrace render_trace(TraceRepresentation rep, std::string_view source, const RawTrace& trace,
                           Generator* generator = nullptr, const Tokenizer& tokenizer = default_tokenizer());

/// Plain-English type of a rendered value: "an integer", "a list of integers", ...
std::string describe_rendered_type(std::string_view rendered);

}  // namespace tracescale
