// SPDX-License-Identifier: Apache-2.0
#pragma once

// Random inputs shared by the unit suites and the acceptance run.

#include <cctype>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "mmkit/common/rng.hpp"
#include "mmkit/dedup/embedding.hpp"
#include "mmkit/media/stream.hpp"
#include "mmkit/metrics/metrics.hpp"

namespace gen {

inline std::string random_text(mmkit::DeterministicRng& rng) {
    static const char* words[] = {"left", "lung", "Renal", "CYST", "no", "yes", "t2", "axial", "caf\xC3\xA9", "mass"};
    std::string s;
    const auto n = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i) s += " ";
        s += words[rng.below(10)];
    }
    return s;
}

/// Sprinkles punctuation, flips ASCII case and pads whitespace. Never
/// inserts inside a multi-byte UTF-8 sequence.
inline std::string perturb(mmkit::DeterministicRng& rng, const std::string& s) {
    static const char* punct[] = {".", ",", "!", "?", ";", ":", "'", "\"", "-", "(", ")", "\xC2\xBF", "\xE2\x80\xA6"};
    std::string out;
    for (char c : s) {
        const bool continuation = (static_cast<unsigned char>(c) & 0xC0) == 0x80;
        if (!continuation && rng.below(4) == 0) out += punct[rng.below(13)];
        if (c == ' ' && rng.below(3) == 0) out += "  ";
        if (static_cast<unsigned char>(c) < 0x80 && std::isalpha(static_cast<unsigned char>(c)) && rng.below(2))
            c = static_cast<char>(std::isupper(static_cast<unsigned char>(c)) ? std::tolower(c) : std::toupper(c));
        out.push_back(c);
    }
    if (rng.below(2)) out += punct[rng.below(13)];
    if (rng.below(3) == 0) out = " " + out + "\t";
    return out;
}

inline mmkit::media::TokenStream random_stream(mmkit::DeterministicRng& rng, std::size_t max_len) {
    using mmkit::media::Token;
    mmkit::media::TokenStream s;
    const auto n = rng.below(max_len + 1);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto r = rng.below(10);
        if (r < 2) {
            s.tokens.push_back(Token::image());
        } else if (r < 3) {
            s.tokens.push_back(Token::end_of_chunk());
        } else {
            s.tokens.push_back(Token::text(static_cast<mmkit::TokenId>(rng.below(1000))));
        }
    }
    return s;
}

/// Per-token NLL values, at least `min_len` of them.
inline std::vector<double> random_nll(mmkit::DeterministicRng& rng, std::size_t min_len) {
    std::vector<double> v(min_len + rng.below(50));
    for (auto& x : v) x = rng.unit() * 200.0;
    return v;
}

inline std::vector<mmkit::dedup::EmbeddingVector> random_vectors(mmkit::DeterministicRng& rng, std::size_t n,
                                                                 std::size_t dim, const std::string& prefix,
                                                                 bool coarse = false) {
    std::vector<mmkit::dedup::EmbeddingVector> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        // Coarse integer grids force many exact distance ties.
        for (auto& x : v) x = coarse ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.normal() * 5.0);
        out.push_back({prefix + std::to_string(i), std::move(v)});
    }
    return out;
}

inline bool bit_equal(const std::vector<mmkit::dedup::DistancePair>& a,
                      const std::vector<mmkit::dedup::DistancePair>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].eval_image_id != b[i].eval_image_id || a[i].train_image_id != b[i].train_image_id) return false;
        if (std::memcmp(&a[i].distance, &b[i].distance, sizeof(double)) != 0) return false;
    }
    return true;
}

/// Text embedder backed by a fixed lookup table.
struct TableEmbedder : mmkit::metrics::TextEmbedderClient {
    std::map<std::string, mmkit::metrics::TokenEmbeddings> table;
    std::vector<mmkit::metrics::EmbeddedText> embed_tokens(const std::vector<std::string>& texts) override {
        std::vector<mmkit::metrics::EmbeddedText> out;
        for (const auto& t : texts) out.push_back({{t}, table.at(t)});
        return out;
    }
};

} // namespace gen
