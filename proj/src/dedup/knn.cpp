// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/parallel.hpp"
#include "mmkit/dedup/embedding.hpp"

namespace mmkit::dedup {

using nlohmann::json;

double euclidean(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

namespace {

struct Candidate {
    double distance;
    std::size_t rank;  // position of the train vector in id order
};

bool closer(const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.rank < b.rank;
}

// Row-major copy of the train set in id order, so that the rank used to
// break distance ties is the row index.
struct TrainMatrix {
    std::size_t dim = 0;
    std::vector<float> rows;
    std::vector<const std::string*> ids;
};

TrainMatrix build_matrix(const std::vector<EmbeddingVector>& train) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return train[a].image_id < train[b].image_id; });
    TrainMatrix m;
    m.dim = train.front().dim();
    m.rows.reserve(train.size() * m.dim);
    for (std::size_t idx : order) {
        m.rows.insert(m.rows.end(), train[idx].vector.begin(), train[idx].vector.end());
        m.ids.push_back(&train[idx].image_id);
    }
    return m;
}

void offer(std::vector<Candidate>& best, std::size_t k, Candidate c) {
    if (best.size() == k && !closer(c, best.back())) return;
    auto pos = std::upper_bound(best.begin(), best.end(), c, closer);
    best.insert(pos, c);
    if (best.size() > k) best.pop_back();
}

// Four independent accumulators keep the per-pair summation order identical
// to euclidean() while exposing instruction-level parallelism.
void scan(const float* query, const TrainMatrix& m, std::size_t k, std::vector<Candidate>& best) {
    const std::size_t n = m.ids.size();
    const std::size_t dim = m.dim;
    std::size_t r = 0;
    for (; r + 4 <= n; r += 4) {
        const float* r0 = m.rows.data() + r * dim;
        const float* r1 = r0 + dim;
        const float* r2 = r1 + dim;
        const float* r3 = r2 + dim;
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double q = static_cast<double>(query[d]);
            const double d0 = q - static_cast<double>(r0[d]);
            const double d1 = q - static_cast<double>(r1[d]);
            const double d2 = q - static_cast<double>(r2[d]);
            const double d3 = q - static_cast<double>(r3[d]);
            a0 += d0 * d0;
            a1 += d1 * d1;
            a2 += d2 * d2;
            a3 += d3 * d3;
        }
        offer(best, k, {std::sqrt(a0), r});
        offer(best, k, {std::sqrt(a1), r + 1});
        offer(best, k, {std::sqrt(a2), r + 2});
        offer(best, k, {std::sqrt(a3), r + 3});
    }
    for (; r < n; ++r) {
        const float* row = m.rows.data() + r * dim;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = static_cast<double>(query[d]) - static_cast<double>(row[d]);
            acc += diff * diff;
        }
        offer(best, k, {std::sqrt(acc), r});
    }
}

} // namespace

std::vector<DistancePair> knn_pairs(const std::vector<EmbeddingVector>& eval, const std::vector<EmbeddingVector>& train,
                                    std::size_t k, std::size_t workers) {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
    if (train.empty()) throw Error(ErrorKind::InvalidArgument, "train set is empty");
    check_collection(train);
    check_collection(eval);
    if (!eval.empty() && eval.front().dim() != train.front().dim())
        throw Error(ErrorKind::Validation, "eval and train embeddings differ in dimension");
    if (k > train.size()) {
        spdlog::warn("k={} exceeds the train set size {}; clamping", k, train.size());
        k = train.size();
    }

    const TrainMatrix matrix = build_matrix(train);
    std::vector<std::vector<Candidate>> per_eval(eval.size());
    parallel_for(eval.size(), workers, [&](std::size_t i) {
        per_eval[i].reserve(k + 1);
        scan(eval[i].vector.data(), matrix, k, per_eval[i]);
    });

    std::vector<DistancePair> pairs;
    pairs.reserve(eval.size() * k);
    for (std::size_t i = 0; i < eval.size(); ++i)
        for (const auto& c : per_eval[i]) pairs.push_back({eval[i].image_id, *matrix.ids[c.rank], c.distance});
    std::sort(pairs.begin(), pairs.end(), [](const DistancePair& a, const DistancePair& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.eval_image_id != b.eval_image_id) return a.eval_image_id < b.eval_image_id;
        return a.train_image_id < b.train_image_id;
    });
    return pairs;
}

LeakageReport apply_threshold(const std::vector<DistancePair>& pairs, double threshold, std::size_t total_eval) {
    std::set<std::string> flagged;
    for (const auto& p : pairs)
        if (p.distance <= threshold) flagged.insert(p.eval_image_id);
    LeakageReport report;
    report.threshold = threshold;
    report.flagged.assign(flagged.begin(), flagged.end());
    report.total_eval = std::max(total_eval, report.flagged.size());
    report.removed_count = report.flagged.size();
    return report;
}

std::vector<bench::VqaItem> filter_eval_set(const std::vector<bench::VqaItem>& items, const LeakageReport& report) {
    const std::unordered_set<std::string> flagged(report.flagged.begin(), report.flagged.end());
    std::vector<bench::VqaItem> kept;
    kept.reserve(items.size());
    for (const auto& item : items) {
        const bool leaked = std::any_of(item.image_ids.begin(), item.image_ids.end(),
                                        [&](const std::string& id) { return flagged.count(id) > 0; });
        if (!leaked) kept.push_back(item);
    }
    return kept;
}

json to_json(const DistancePair& pair) {
    return {{"eval_image_id", pair.eval_image_id}, {"train_image_id", pair.train_image_id}, {"distance", pair.distance}};
}

DistancePair pair_from_json(const json& j) {
    return {io::require_string(j, "eval_image_id", "pair"), io::require_string(j, "train_image_id", "pair"),
            io::require(j, "distance", "pair").get<double>()};
}

json to_json(const LeakageReport& report) {
    return {{"threshold", report.threshold},
            {"flagged", report.flagged},
            {"total_eval", report.total_eval},
            {"removed_count", report.removed_count}};
}

LeakageReport report_from_json(const json& j) {
    LeakageReport r;
    r.threshold = io::require(j, "threshold", "leakage report").get<double>();
    r.flagged = io::require(j, "flagged", "leakage report").get<std::vector<std::string>>();
    r.total_eval = io::require(j, "total_eval", "leakage report").get<std::size_t>();
    r.removed_count = io::require(j, "removed_count", "leakage report").get<std::size_t>();
    if (r.removed_count != r.flagged.size())
        throw Error(ErrorKind::Schema, "leakage report: removed_count differs from flagged size");
    return r;
}

} // namespace mmkit::dedup
