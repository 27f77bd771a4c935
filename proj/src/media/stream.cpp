// SPDX-License-Identifier: Apache-2.0
#include "mmkit/media/stream.hpp"

#include <cmath>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"

namespace mmkit::media {

using nlohmann::json;

std::size_t TokenStream::image_count() const {
    std::size_t n = 0;
    for (const auto& t : tokens) n += t.kind == TokenKind::ImageMarker;
    return n;
}

MediaIndexMap assign_media_indices(const TokenStream& stream) {
    MediaIndexMap map;
    map.attends.reserve(stream.size());
    map.loss_mask.reserve(stream.size());
    std::optional<std::size_t> current;
    std::size_t markers = 0;
    for (const auto& token : stream.tokens) {
        if (token.kind == TokenKind::ImageMarker) {
            map.attends.push_back(std::nullopt);
            map.loss_mask.push_back(false);
            current = markers++;
        } else {
            map.attends.push_back(current);
            map.loss_mask.push_back(true);
        }
    }
    return map;
}

void validate(const TokenStream& stream, std::size_t expected_images) {
    if (stream.tokens.empty()) throw Error(ErrorKind::Validation, "token stream is empty");
    const std::size_t markers = stream.image_count();
    if (markers != expected_images)
        throw Error(ErrorKind::Validation, "token stream has " + std::to_string(markers) + " image markers for " +
                                               std::to_string(expected_images) + " images");
}

std::string render(const TokenStream& stream) {
    std::string out;
    bool need_space = false;
    for (const auto& t : stream.tokens) {
        switch (t.kind) {
        case TokenKind::ImageMarker:
            out += kImagePlaceholder;
            need_space = false;
            break;
        case TokenKind::EndOfChunk:
            out += kEndOfChunk;
            need_space = false;
            break;
        case TokenKind::Text:
            if (need_space) out.push_back(' ');
            out += t.surface.empty() ? std::to_string(t.id) : t.surface;
            need_space = true;
            break;
        }
    }
    return out;
}

json to_json(const TokenStream& stream) {
    json tokens = json::array();
    for (const auto& t : stream.tokens) {
        switch (t.kind) {
        case TokenKind::Text: {
            json j = {{"k", "t"}, {"id", t.id}};
            if (!t.surface.empty()) j["s"] = t.surface;
            tokens.push_back(std::move(j));
            break;
        }
        case TokenKind::ImageMarker: tokens.push_back({{"k", "img"}}); break;
        case TokenKind::EndOfChunk: tokens.push_back({{"k", "eoc"}}); break;
        }
    }
    return {{"tokens", std::move(tokens)}};
}

TokenStream stream_from_json(const json& j) {
    TokenStream stream;
    for (const auto& t : io::require(j, "tokens", "token stream")) {
        const std::string kind = io::require_string(t, "k", "token");
        if (kind == "t") {
            stream.tokens.push_back(Token::text(io::require(t, "id", "token").get<TokenId>(), t.value("s", "")));
        } else if (kind == "img") {
            stream.tokens.push_back(Token::image());
        } else if (kind == "eoc") {
            stream.tokens.push_back(Token::end_of_chunk());
        } else {
            throw Error(ErrorKind::Schema, "token: unknown kind '" + kind + "'");
        }
    }
    return stream;
}

json to_json(const MediaIndexMap& media) {
    json attends = json::array();
    for (const auto& a : media.attends) attends.push_back(a ? json(*a) : json(nullptr));
    json mask = json::array();
    for (bool b : media.loss_mask) mask.push_back(b);
    return {{"attends", std::move(attends)}, {"loss_mask", std::move(mask)}};
}

MediaIndexMap media_from_json(const json& j) {
    MediaIndexMap m;
    for (const auto& a : io::require(j, "attends", "media map"))
        m.attends.push_back(a.is_null() ? std::nullopt : std::optional<std::size_t>(a.get<std::size_t>()));
    for (const auto& b : io::require(j, "loss_mask", "media map")) m.loss_mask.push_back(b.get<bool>());
    if (m.attends.size() != m.loss_mask.size())
        throw Error(ErrorKind::Schema, "media map: attends and loss_mask lengths differ");
    return m;
}

namespace {

double mean_of(const std::vector<double>& values, const char* name) {
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0)
            throw Error(ErrorKind::InvalidArgument, std::string(name) + " entries must be finite and >= 0");
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

} // namespace

double joint_objective(const ObjectiveInputs& inputs) {
    if (!std::isfinite(inputs.lambda) || inputs.lambda < 0.0)
        throw Error(ErrorKind::InvalidArgument, "lambda must be finite and >= 0");
    if (inputs.paired_nll.empty()) throw Error(ErrorKind::InvalidArgument, "paired term has no examples");
    const double paired = mean_of(inputs.paired_nll, "paired_nll");
    if (inputs.lambda == 0.0) return paired;
    if (inputs.interleaved_nll.empty())
        throw Error(ErrorKind::InvalidArgument, "interleaved term has nonzero weight but no examples");
    return paired + inputs.lambda * mean_of(inputs.interleaved_nll, "interleaved_nll");
}

double sequence_nll(std::span<const double> token_logprobs, const std::vector<bool>& mask) {
    if (token_logprobs.size() != mask.size())
        throw Error(ErrorKind::InvalidArgument, "logprob and mask lengths differ: " +
                                                    std::to_string(token_logprobs.size()) + " vs " +
                                                    std::to_string(mask.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) sum += token_logprobs[i];
    return 0.0 - sum;
}

} // namespace mmkit::media
