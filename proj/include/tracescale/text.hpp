// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tracescale::text {

/// Splits on '\n'. A trailing newline does not produce an empty last element.
std::vector<std::string_view> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Strips trailing whitespace from every line and trailing blank lines.
std::string normalize_trailing_whitespace(std::string_view s);

/// Collapses every whitespace run to one space and trims both ends.
std::string collapse_whitespace(std::string_view s);

bool contains(std::string_view haystack, std::string_view needle);
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tracescale::text
