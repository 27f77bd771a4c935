// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/hash.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/rng.hpp"
#include "mmkit/common/text.hpp"
#include "mmkit/metrics/metrics.hpp"

namespace mmkit::metrics {

using nlohmann::json;

std::string normalize(std::string_view s) { return text::normalize_for_match(s); }

bool exact_match(std::string_view generated, std::string_view reference) {
    return normalize(generated) == normalize(reference);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::Validation, "token embeddings differ in dimension");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact for a == b.
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace {

double greedy_side(const TokenEmbeddings& from, const TokenEmbeddings& to) {
    double sum = 0.0;
    for (const auto& u : from) {
        double best = -1.0;
        for (const auto& v : to) best = std::max(best, cosine(u, v));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

} // namespace

BertScore bert_score(const TokenEmbeddings& candidate, const TokenEmbeddings& reference) {
    BertScore s;
    if (candidate.empty() || reference.empty()) return s;
    s.precision = greedy_side(candidate, reference);
    s.recall = greedy_side(reference, candidate);
    const double denom = s.precision + s.recall;
    s.f1 = denom == 0.0 ? 0.0 : 2.0 * (s.precision * s.recall) / denom;
    return s;
}

RemoteTextEmbedder::RemoteTextEmbedder(std::unique_ptr<JsonTransport> transport, RetryPolicy retry)
    : transport_(std::move(transport)), retry_(retry) {}

std::vector<EmbeddedText> RemoteTextEmbedder::embed_tokens(const std::vector<std::string>& texts) {
    const json reply = call_with_retry(*transport_, "/embed_tokens", {{"texts", texts}}, retry_);
    std::vector<EmbeddedText> out;
    try {
        const auto& vectors = reply.at("token_vectors");
        if (vectors.size() != texts.size())
            throw Error(ErrorKind::Transport, "text embedder returned " + std::to_string(vectors.size()) +
                                                  " entries for " + std::to_string(texts.size()) + " texts");
        for (std::size_t i = 0; i < texts.size(); ++i) {
            EmbeddedText e;
            e.vectors = vectors.at(i).get<TokenEmbeddings>();
            if (reply.contains("tokens")) e.tokens = reply.at("tokens").at(i).get<std::vector<std::string>>();
            out.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Transport, std::string("malformed text embedder reply: ") + e.what());
    }
    return out;
}

HashingTextEmbedder::HashingTextEmbedder(std::size_t dim, double context_weight)
    : dim_(dim), context_weight_(context_weight) {}

std::vector<double> HashingTextEmbedder::word_vector(std::string_view word) const {
    DeterministicRng rng(hash::fnv1a64(word));
    std::vector<double> v(dim_);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<EmbeddedText> HashingTextEmbedder::embed_tokens(const std::vector<std::string>& texts) {
    std::vector<EmbeddedText> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        EmbeddedText e;
        const std::string norm = normalize(t);
        for (auto w : text::split_words(norm)) e.tokens.emplace_back(w);
        std::vector<std::vector<double>> base;
        base.reserve(e.tokens.size());
        for (const auto& w : e.tokens) base.push_back(word_vector(w));
        for (std::size_t i = 0; i < base.size(); ++i) {
            std::vector<double> v = base[i];
            for (std::size_t d = 0; d < dim_; ++d) {
                if (i > 0) v[d] += context_weight_ * base[i - 1][d];
                if (i + 1 < base.size()) v[d] += context_weight_ * base[i + 1][d];
            }
            e.vectors.push_back(std::move(v));
        }
        out.push_back(std::move(e));
    }
    return out;
}

double bert_sim(const std::string& candidate, const std::string& reference, TextEmbedderClient& embedder) {
    const auto embedded = embedder.embed_tokens({candidate, reference});
    if (embedded.size() != 2) throw Error(ErrorKind::Transport, "text embedder returned the wrong number of texts");
    if (embedded[0].vectors.empty() || embedded[1].vectors.empty()) {
        spdlog::warn("BERT-sim with an empty side is defined as 0");
        return 0.0;
    }
    return bert_score(embedded[0].vectors, embedded[1].vectors).f1;
}

} // namespace mmkit::metrics
