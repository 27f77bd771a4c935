// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmkit {

using TokenId = std::int64_t;

struct TextToken {
    TokenId id = 0;
    std::string surface;
};

/// Pluggable tokenizer used for token budgeting. Implementations must be
/// thread-safe for concurrent const use.
class Tokenizer {
  public:
    virtual ~Tokenizer() = default;

    virtual std::vector<TextToken> encode(std::string_view text) const = 0;

    virtual std::size_t count(std::string_view text) const { return encode(text).size(); }

    /// Splits text so the head holds exactly `n` tokens (or all of them if
    /// fewer exist). Surrounding whitespace at the cut is discarded.
    virtual std::pair<std::string, std::string> split_at(std::string_view text, std::size_t n) const = 0;

    /// Keeps only the last `n` tokens.
    virtual std::string keep_last(std::string_view text, std::size_t n) const = 0;
};

/// One token per ASCII-whitespace-delimited word. Ids are a stable 31-bit
/// hash of the word, so no vocabulary file is needed.
class WhitespaceTokenizer final : public Tokenizer {
  public:
    std::vector<TextToken> encode(std::string_view text) const override;
    std::size_t count(std::string_view text) const override;
    std::pair<std::string, std::string> split_at(std::string_view text, std::size_t n) const override;
    std::string keep_last(std::string_view text, std::size_t n) const override;

    static TokenId word_id(std::string_view word);
};

} // namespace mmkit
