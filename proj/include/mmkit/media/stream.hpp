// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkit/common/tokenizer.hpp"

namespace mmkit::media {

enum class TokenKind { Text, ImageMarker, EndOfChunk };

struct Token {
    TokenKind kind = TokenKind::Text;
    TokenId id = 0;       // meaningful for Text only
    std::string surface;  // optional, Text only

    static Token text(TokenId id, std::string surface = {}) { return {TokenKind::Text, id, std::move(surface)}; }
    static Token image() { return {TokenKind::ImageMarker, 0, {}}; }
    static Token end_of_chunk() { return {TokenKind::EndOfChunk, 0, {}}; }

    bool operator==(const Token&) const = default;
};

inline constexpr std::string_view kImagePlaceholder = "<image>";
inline constexpr std::string_view kEndOfChunk = "<|endofchunk|>";

struct TokenStream {
    std::vector<Token> tokens;

    std::size_t size() const { return tokens.size(); }
    std::size_t image_count() const;
    void append(const TokenStream& other) { tokens.insert(tokens.end(), other.tokens.begin(), other.tokens.end()); }
    bool operator==(const TokenStream&) const = default;
};

/// Per-token media bookkeeping. attends[i] is the 0-based index of the
/// image whose marker most recently precedes position i; it is empty before
/// the first marker and on marker positions themselves. loss_mask is false
/// exactly on marker positions.
struct MediaIndexMap {
    std::vector<std::optional<std::size_t>> attends;
    std::vector<bool> loss_mask;
    bool operator==(const MediaIndexMap&) const = default;
};

/// EndOfChunk does not reset attention; it only delimits examples.
MediaIndexMap assign_media_indices(const TokenStream& stream);

/// Throws Validation if the stream is empty or its marker count differs
/// from `expected_images`.
void validate(const TokenStream& stream, std::size_t expected_images);

/// Text rendering with "<image>" and "<|endofchunk|>" for text-only runners.
std::string render(const TokenStream& stream);

nlohmann::json to_json(const TokenStream& stream);
TokenStream stream_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MediaIndexMap& media);
MediaIndexMap media_from_json(const nlohmann::json& j);

// Objective bookkeeping -------------------------------------------------

inline constexpr double kDefaultLambda = 1.0;

struct ObjectiveInputs {
    std::vector<double> paired_nll;       // per-example summed NLL, >= 0
    std::vector<double> interleaved_nll;  // same, interleaved examples
    double lambda = kDefaultLambda;
};

/// mean(paired_nll) + lambda * mean(interleaved_nll). A term with nonzero
/// weight must have at least one example; lambda must be finite and >= 0.
double joint_objective(const ObjectiveInputs& inputs);

/// Negated sum of log-probabilities over positions where the mask is set.
double sequence_nll(std::span<const double> token_logprobs, const std::vector<bool>& mask);

} // namespace mmkit::media
