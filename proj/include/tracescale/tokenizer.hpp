// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tracescale {

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive byte offset
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
  std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Tokens are maximal runs of [A-Za-z0-9_] or single non-space code points;
/// whitespace only separates. "a=1, b=2" is 7 tokens.
class PunctuationTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

std::size_t count_tokens(std::string_view text);
std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer);

/// Longest prefix of `text` holding at most `max_tokens` tokens, cut right
/// after the last kept token.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens,
                               const Tokenizer& tokenizer = default_tokenizer());

}  // namespace tracescale
