// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkit/bench/item.hpp"
#include "mmkit/bench/runner.hpp"
#include "mmkit/common/transport.hpp"

namespace mmkit::metrics {

/// Lowercase, strip punctuation, collapse whitespace, trim.
std::string normalize(std::string_view s);

bool exact_match(std::string_view generated, std::string_view reference);

// BERT-similarity --------------------------------------------------------

/// One contextual vector per token.
using TokenEmbeddings = std::vector<std::vector<double>>;

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy matching: precision is the mean over candidate tokens of the best
/// cosine similarity against any reference token; recall is symmetric.
/// No idf weighting, no baseline rescaling. Either side empty → all zeros.
BertScore bert_score(const TokenEmbeddings& candidate, const TokenEmbeddings& reference);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct EmbeddedText {
    std::vector<std::string> tokens;  // provider tokenization, kept for audit
    TokenEmbeddings vectors;
};

class TextEmbedderClient {
  public:
    virtual ~TextEmbedderClient() = default;
    virtual std::vector<EmbeddedText> embed_tokens(const std::vector<std::string>& texts) = 0;
};

/// POST /embed_tokens {"texts"} → {"dim","token_vectors","tokens"}.
class RemoteTextEmbedder final : public TextEmbedderClient {
  public:
    explicit RemoteTextEmbedder(std::unique_ptr<JsonTransport> transport, RetryPolicy retry = {});
    std::vector<EmbeddedText> embed_tokens(const std::vector<std::string>& texts) override;

  private:
    std::unique_ptr<JsonTransport> transport_;
    RetryPolicy retry_;
};

/// Offline embedder: tokens are normalized words; each token's vector is a
/// seeded Gaussian draw keyed by the word, mixed with a fraction of its
/// neighbours' vectors so identical texts embed identically.
class HashingTextEmbedder final : public TextEmbedderClient {
  public:
    explicit HashingTextEmbedder(std::size_t dim = 64, double context_weight = 0.25);
    std::vector<EmbeddedText> embed_tokens(const std::vector<std::string>& texts) override;

  private:
    std::vector<double> word_vector(std::string_view word) const;
    std::size_t dim_;
    double context_weight_;
};

/// F1 between two texts using one embedder call; an empty side gives 0 with
/// a warning.
double bert_sim(const std::string& candidate, const std::string& reference, TextEmbedderClient& embedder);

// Clinical scores -------------------------------------------------------

struct Rating {
    std::string rater_id;
    std::string item_id;
    std::string generation_ref;
    int score = 0;  // 0..10
    std::string submitted_at;
    bool operator==(const Rating&) const = default;
};

inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 10;

/// Validates the 0..10 integer range; throws Validation.
Rating make_rating(std::string rater_id, std::string item_id, std::string generation_ref, int score,
                   std::string submitted_at = {});
Rating rating_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Rating& r);

struct ModelKey {
    std::string model_id;
    bench::Mode mode = bench::Mode::ZeroShot;
    auto operator<=>(const ModelKey&) const = default;
    std::string label() const;  // "model_id:mode"
};

struct ClinicalScore {
    double score = 0.0;         // mean over rated generations of the per-generation rater mean
    std::size_t rated = 0;      // generations with >= 1 rating
    std::size_t unrated = 0;    // excluded for lack of ratings
};

/// Per generation: mean over its raters; per model+mode: mean over rated
/// generations. Throws Integrity for a rating without a generation. Failed
/// generations are ignored.
std::map<ModelKey, ClinicalScore> clinical_aggregate(const std::vector<Rating>& ratings,
                                                     const std::vector<bench::Generation>& generations);

// Reports and ranks ------------------------------------------------------

struct ModelMetrics {
    std::optional<double> clinical;
    std::optional<double> bert_sim;
    std::optional<double> exact_match;
    std::size_t n_items = 0;
    std::size_t clinical_unrated = 0;
};

struct MetricsReport {
    std::string dataset;
    std::map<ModelKey, ModelMetrics> per_model;
};

enum class MetricField { Clinical, BertSim, ExactMatch };
MetricField metric_from_string(std::string_view s);
std::string_view to_string(MetricField f);

struct ModelRanks {
    std::vector<std::pair<std::string, double>> ranks;  // (dataset, rank)
    double avg_rank = 0.0;
    std::size_t datasets_counted = 0;
};

struct RankSummary {
    MetricField metric = MetricField::Clinical;
    std::map<ModelKey, ModelRanks> per_model;
};

/// Within each dataset, rank models present with a value for the metric
/// (higher is better, rank 1 best, ties share the mean of their positions),
/// then average over the datasets where each model appears. Throws
/// InvalidArgument for no reports or a dataset with fewer than two models.
RankSummary average_rank(const std::vector<MetricsReport>& reports, MetricField metric = MetricField::Clinical);

struct ReportOptions {
    bool exact_match = true;
    bool bert_sim = true;
};

/// Fills clinical (when any ratings exist), BERT-sim and exact-match per
/// model+mode. Throws Integrity when a generation has no gold item or belongs
/// to another dataset.
MetricsReport build_report(const std::string& dataset, const std::vector<bench::Generation>& generations,
                           const std::vector<bench::VqaItem>& gold, const std::vector<Rating>& ratings,
                           TextEmbedderClient* embedder, const ReportOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RankSummary& summary);

/// Table layout: model, Clinical eval. score, BERT-sim, Exact-match.
std::string to_csv(const MetricsReport& report, bool include_exact_match = true);

} // namespace mmkit::metrics
