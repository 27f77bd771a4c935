// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/metrics/metrics.hpp"

namespace mmkit::metrics {

using nlohmann::json;

std::string ModelKey::label() const { return model_id + ":" + std::string(bench::to_string(mode)); }

Rating make_rating(std::string rater_id, std::string item_id, std::string generation_ref, int score,
                   std::string submitted_at) {
    if (score < kMinScore || score > kMaxScore)
        throw Error(ErrorKind::Validation, "score " + std::to_string(score) + " is outside [0, 10]");
    return {std::move(rater_id), std::move(item_id), std::move(generation_ref), score, std::move(submitted_at)};
}

Rating rating_from_json(const json& j) {
    const json& score = io::require(j, "score", "rating");
    if (!score.is_number_integer()) throw Error(ErrorKind::Validation, "rating: score must be an integer");
    return make_rating(io::require_string(j, "rater_id", "rating"), io::require_string(j, "item_id", "rating"),
                       io::require_string(j, "generation_ref", "rating"), score.get<int>(), j.value("submitted_at", ""));
}

json to_json(const Rating& r) {
    return {{"rater_id", r.rater_id},
            {"item_id", r.item_id},
            {"generation_ref", r.generation_ref},
            {"score", r.score},
            {"submitted_at", r.submitted_at}};
}

std::map<ModelKey, ClinicalScore> clinical_aggregate(const std::vector<Rating>& ratings,
                                                     const std::vector<bench::Generation>& generations) {
    std::unordered_map<std::string, const bench::Generation*> by_ref;
    for (const auto& g : generations)
        if (!g.failed) by_ref[bench::generation_ref(g)] = &g;

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::unordered_map<std::string, Acc> per_generation;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : ratings) {
        const auto it = by_ref.find(r.generation_ref);
        if (it == by_ref.end())
            throw Error(ErrorKind::Integrity, "rating by " + r.rater_id + " references unknown generation " + r.generation_ref);
        if (it->second->item_id != r.item_id)
            throw Error(ErrorKind::Integrity, "rating for item " + r.item_id + " references a generation of item " +
                                                  it->second->item_id);
        if (r.score < kMinScore || r.score > kMaxScore)
            throw Error(ErrorKind::Validation, "score " + std::to_string(r.score) + " is outside [0, 10]");
        if (!seen.emplace(r.rater_id, r.generation_ref).second)
            throw Error(ErrorKind::Integrity, "rater " + r.rater_id + " rated " + r.generation_ref + " twice");
        auto& acc = per_generation[r.generation_ref];
        acc.sum += r.score;
        ++acc.n;
    }

    std::map<ModelKey, Acc> per_model;
    std::map<ModelKey, ClinicalScore> out;
    for (const auto& [ref, g] : by_ref) {
        const ModelKey key{g->model_id, g->mode};
        const auto it = per_generation.find(ref);
        if (it == per_generation.end()) {
            ++out[key].unrated;
            continue;
        }
        auto& acc = per_model[key];
        acc.sum += it->second.sum / static_cast<double>(it->second.n);
        ++acc.n;
    }
    for (const auto& [key, acc] : per_model) {
        auto& s = out[key];
        s.score = acc.sum / static_cast<double>(acc.n);
        s.rated = acc.n;
    }
    return out;
}

MetricField metric_from_string(std::string_view s) {
    if (s == "clinical") return MetricField::Clinical;
    if (s == "bert_sim") return MetricField::BertSim;
    if (s == "exact_match") return MetricField::ExactMatch;
    throw Error(ErrorKind::InvalidArgument, "unknown metric '" + std::string(s) + "'");
}

std::string_view to_string(MetricField f) {
    switch (f) {
    case MetricField::Clinical: return "clinical";
    case MetricField::BertSim: return "bert_sim";
    case MetricField::ExactMatch: return "exact_match";
    }
    return "clinical";
}

namespace {

std::optional<double> field(const ModelMetrics& m, MetricField f) {
    switch (f) {
    case MetricField::Clinical: return m.clinical;
    case MetricField::BertSim: return m.bert_sim;
    case MetricField::ExactMatch: return m.exact_match;
    }
    return std::nullopt;
}

} // namespace

RankSummary average_rank(const std::vector<MetricsReport>& reports, MetricField metric) {
    if (reports.empty()) throw Error(ErrorKind::InvalidArgument, "ranking needs at least one dataset report");
    RankSummary summary;
    summary.metric = metric;
    for (const auto& report : reports) {
        std::vector<std::pair<ModelKey, double>> present;
        for (const auto& [key, m] : report.per_model)
            if (auto v = field(m, metric)) present.emplace_back(key, *v);
        if (present.size() < 2)
            throw Error(ErrorKind::InvalidArgument, "dataset " + report.dataset + " has fewer than two models with " +
                                                        std::string(to_string(metric)));
        std::stable_sort(present.begin(), present.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        for (std::size_t i = 0; i < present.size();) {
            std::size_t j = i;
            while (j < present.size() && present[j].second == present[i].second) ++j;
            // Positions i+1 .. j share their mean.
            const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
            for (std::size_t t = i; t < j; ++t) summary.per_model[present[t].first].ranks.emplace_back(report.dataset, rank);
            i = j;
        }
    }
    for (auto& [key, r] : summary.per_model) {
        double sum = 0.0;
        for (const auto& [dataset, rank] : r.ranks) sum += rank;
        r.datasets_counted = r.ranks.size();
        r.avg_rank = sum / static_cast<double>(r.datasets_counted);
    }
    return summary;
}

MetricsReport build_report(const std::string& dataset, const std::vector<bench::Generation>& generations,
                           const std::vector<bench::VqaItem>& gold, const std::vector<Rating>& ratings,
                           TextEmbedderClient* embedder, const ReportOptions& options) {
    std::unordered_map<std::string, const bench::VqaItem*> gold_by_id;
    for (const auto& item : gold) gold_by_id[item.item_id] = &item;

    struct Acc {
        std::size_t n = 0;
        std::size_t matched = 0;
        double bert_sum = 0.0;
        std::vector<std::string> candidates;
        std::vector<std::string> references;
    };
    std::map<ModelKey, Acc> acc;
    for (const auto& g : generations) {
        const auto it = gold_by_id.find(g.item_id);
        if (it == gold_by_id.end()) throw Error(ErrorKind::Integrity, "no gold item for generation of " + g.item_id);
        if (it->second->dataset != dataset)
            throw Error(ErrorKind::Integrity, "generation for " + g.item_id + " belongs to dataset " + it->second->dataset);
        if (g.failed) {
            spdlog::warn("skipping failed generation {}/{}", g.item_id, g.model_id);
            continue;
        }
        auto& a = acc[ModelKey{g.model_id, g.mode}];
        ++a.n;
        a.matched += exact_match(g.text, it->second->answer);
        a.candidates.push_back(g.text);
        a.references.push_back(it->second->answer);
    }

    const bool do_bert = options.bert_sim && embedder != nullptr;
    if (options.bert_sim && embedder == nullptr) spdlog::warn("no text embedder configured; BERT-sim omitted");
    constexpr std::size_t kChunk = 32;
    MetricsReport report;
    report.dataset = dataset;
    for (auto& [key, a] : acc) {
        ModelMetrics m;
        m.n_items = a.n;
        if (options.exact_match) m.exact_match = static_cast<double>(a.matched) / static_cast<double>(a.n);
        if (do_bert) {
            for (std::size_t start = 0; start < a.n; start += kChunk) {
                const std::size_t end = std::min(a.n, start + kChunk);
                std::vector<std::string> texts;
                for (std::size_t i = start; i < end; ++i) {
                    texts.push_back(a.candidates[i]);
                    texts.push_back(a.references[i]);
                }
                const auto embedded = embedder->embed_tokens(texts);
                if (embedded.size() != texts.size())
                    throw Error(ErrorKind::Transport, "text embedder returned the wrong number of texts");
                for (std::size_t i = 0; i < end - start; ++i) {
                    const auto& cand = embedded[2 * i].vectors;
                    const auto& ref = embedded[2 * i + 1].vectors;
                    if (cand.empty() || ref.empty()) spdlog::warn("BERT-sim with an empty side is defined as 0");
                    a.bert_sum += bert_score(cand, ref).f1;
                }
            }
            m.bert_sim = a.bert_sum / static_cast<double>(a.n);
        }
        report.per_model[key] = m;
    }

    if (!ratings.empty()) {
        for (const auto& [key, score] : clinical_aggregate(ratings, generations)) {
            auto& m = report.per_model[key];
            m.clinical_unrated = score.unrated;
            if (score.rated > 0) m.clinical = score.score;
        }
    }
    return report;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

json to_json(const MetricsReport& report) {
    json models = json::array();
    for (const auto& [key, m] : report.per_model) {
        models.push_back({{"model_id", key.model_id},
                          {"mode", bench::to_string(key.mode)},
                          {"clinical", optional_json(m.clinical)},
                          {"bert_sim", optional_json(m.bert_sim)},
                          {"exact_match", optional_json(m.exact_match)},
                          {"n_items", m.n_items},
                          {"clinical_unrated", m.clinical_unrated}});
    }
    return {{"dataset", report.dataset}, {"per_model", std::move(models)}};
}

MetricsReport report_from_json(const json& j) {
    MetricsReport report;
    report.dataset = io::require_string(j, "dataset", "report");
    for (const auto& m : io::require(j, "per_model", "report")) {
        const ModelKey key{io::require_string(m, "model_id", "report model"),
                           bench::mode_from_string(io::require_string(m, "mode", "report model"))};
        ModelMetrics mm;
        mm.clinical = optional_from(m, "clinical");
        mm.bert_sim = optional_from(m, "bert_sim");
        mm.exact_match = optional_from(m, "exact_match");
        mm.n_items = m.value("n_items", std::size_t{0});
        mm.clinical_unrated = m.value("clinical_unrated", std::size_t{0});
        if (mm.clinical && (*mm.clinical < 0.0 || *mm.clinical > 10.0))
            throw Error(ErrorKind::Validation, "report: clinical score outside [0, 10] for " + key.label());
        if (mm.exact_match && (*mm.exact_match < 0.0 || *mm.exact_match > 1.0))
            throw Error(ErrorKind::Validation, "report: exact_match outside [0, 1] for " + key.label());
        if (mm.bert_sim && (*mm.bert_sim < -1.0 || *mm.bert_sim > 1.0))
            throw Error(ErrorKind::Validation, "report: bert_sim outside [-1, 1] for " + key.label());
        if (!report.per_model.emplace(key, mm).second)
            throw Error(ErrorKind::DuplicateId, "report: duplicate entry for " + key.label());
    }
    return report;
}

json to_json(const RankSummary& summary) {
    json models = json::array();
    for (const auto& [key, r] : summary.per_model) {
        json ranks = json::array();
        for (const auto& [dataset, rank] : r.ranks) ranks.push_back({{"dataset", dataset}, {"rank", rank}});
        models.push_back({{"model_id", key.model_id},
                          {"mode", bench::to_string(key.mode)},
                          {"ranks", std::move(ranks)},
                          {"avg_rank", r.avg_rank},
                          {"datasets_counted", r.datasets_counted}});
    }
    return {{"metric", to_string(summary.metric)}, {"per_model", std::move(models)}};
}

std::string to_csv(const MetricsReport& report, bool include_exact_match) {
    auto fmt = [](const std::optional<double>& v, int digits) -> std::string {
        if (!v) return "";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
        return buf;
    };
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q.push_back('"');
            q.push_back(c);
        }
        return q + "\"";
    };
    std::string out = "model,Clinical eval. score,BERT-sim";
    if (include_exact_match) out += ",Exact-match";
    out += "\n";
    for (const auto& [key, m] : report.per_model) {
        std::string mode(bench::to_string(key.mode));
        std::replace(mode.begin(), mode.end(), '_', '-');
        out += quote(key.model_id + " " + mode) + "," + fmt(m.clinical, 2) + "," + fmt(m.bert_sim, 3);
        if (include_exact_match) out += "," + fmt(m.exact_match, 3);
        out += "\n";
    }
    return out;
}

} // namespace mmkit::metrics
