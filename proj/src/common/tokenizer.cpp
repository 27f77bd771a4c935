// SPDX-License-Identifier: Apache-2.0
#include "mmkit/common/tokenizer.hpp"

#include "mmkit/common/hash.hpp"
#include "mmkit/common/text.hpp"

namespace mmkit {
namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

} // namespace

TokenId WhitespaceTokenizer::word_id(std::string_view word) {
    return static_cast<TokenId>(hash::fnv1a32(word) & 0x7fffffffU);
}

std::vector<TextToken> WhitespaceTokenizer::encode(std::string_view text) const {
    std::vector<TextToken> tokens;
    for (auto word : text::split_words(text)) tokens.push_back({word_id(word), std::string(word)});
    return tokens;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_ws(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::pair<std::string, std::string> WhitespaceTokenizer::split_at(std::string_view text, std::size_t n) const {
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_ws(text[i])) ++i;
        if (i >= text.size()) break;
        if (seen == n) break;
        while (i < text.size() && !is_ws(text[i])) ++i;
        ++seen;
    }
    return {text::trim(text.substr(0, i)), text::trim(text.substr(i))};
}

std::string WhitespaceTokenizer::keep_last(std::string_view text, std::size_t n) const {
    const std::size_t total = count(text);
    if (n >= total) return text::trim(text);
    return split_at(text, total - n).second;
}

} // namespace mmkit
