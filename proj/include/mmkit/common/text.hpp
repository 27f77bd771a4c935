// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mmkit::text {

bool is_valid_utf8(std::string_view bytes);

/// Number of code points; input must be valid UTF-8.
std::size_t codepoint_count(std::string_view utf8);

/// True for Unicode punctuation (general categories P*) and every ASCII
/// symbol character.
bool is_punctuation(char32_t cp);

/// Lowercase, remove punctuation, collapse whitespace runs to one space,
/// trim. Shared by answer matching and paragraph dedup.
std::string normalize_for_match(std::string_view utf8);

std::string trim(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

/// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string_view> split_words(std::string_view s);

void append_utf8(std::string& out, char32_t cp);

} // namespace mmkit::text
