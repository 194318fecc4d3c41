// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/tokenizer.hpp"

#include <algorithm>

namespace tracescale {
namespace {

bool is_word(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t codepoint_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::vector<TokenSpan> PunctuationTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_word(c)) {
      const std::size_t start = i;
      while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back({start, i});
    } else {
      const std::size_t len = std::min(codepoint_length(c), text.size() - i);
      out.push_back({i, i + len});
      i += len;
    }
  }
  return out;
}

const Tokenizer& default_tokenizer() {
  static const PunctuationTokenizer t;
  return t;
}

std::size_t count_tokens(std::string_view text) { return default_tokenizer().count(text); }

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) { return tokenizer.count(text); }

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens, const Tokenizer& tokenizer) {
  const auto spans = tokenizer.tokenize(text);
  if (spans.size() <= max_tokens) return std::string(text);
  if (max_tokens == 0) return {};
  return std::string(text.substr(0, spans[max_tokens - 1].end));
}

}  // namespace tracescale
