// SPDX-License-Identifier: Apache-2.0
#include <limits>

#include "mmkit/common/error.hpp"
#include "mmkit/common/rng.hpp"
#include "mmkit/dedup/embedding.hpp"

namespace mmkit::dedup {
namespace {

double squared_distance(const std::vector<float>& v, const std::vector<double>& c) {
    double acc = 0.0;
    for (std::size_t d = 0; d < c.size(); ++d) {
        const double diff = static_cast<double>(v[d]) - c[d];
        acc += diff * diff;
    }
    return acc;
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

std::vector<std::vector<double>> seed_centroids(const std::vector<EmbeddingVector>& vectors, std::size_t k,
                                                DeterministicRng& rng) {
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    centroids.push_back(widen(vectors[rng.below(vectors.size())].vector));
    std::vector<double> nearest(vectors.size(), std::numeric_limits<double>::infinity());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(vectors[i].vector, centroids.back()));
            total += nearest[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.unit() * total;
            double running = 0.0;
            pick = vectors.size() - 1;
            for (std::size_t i = 0; i < vectors.size(); ++i) {
                running += nearest[i];
                if (running > target && nearest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All points coincide with existing centroids.
            pick = rng.below(vectors.size());
        }
        centroids.push_back(widen(vectors[pick].vector));
    }
    return centroids;
}

} // namespace

ClusterResult cluster_embeddings(const std::vector<EmbeddingVector>& vectors, std::size_t k, std::uint64_t seed,
                                 std::size_t max_iters) {
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "cluster count must be >= 1");
    if (k > vectors.size())
        throw Error(ErrorKind::InvalidArgument, "cluster count " + std::to_string(k) + " exceeds " +
                                                    std::to_string(vectors.size()) + " vectors");
    check_collection(vectors);

    DeterministicRng rng(seed);
    ClusterResult result;
    result.centroids = seed_centroids(vectors, k, rng);
    result.assignment.assign(vectors.size(), std::numeric_limits<std::size_t>::max());
    const std::size_t dim = vectors.front().dim();

    for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iters); ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(vectors[i].vector, result.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            objective += best_d;
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }
        result.objective_history.push_back(objective);
        result.iterations = iter + 1;
        if (!changed) {
            result.converged = true;
            break;
        }
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            auto& s = sums[result.assignment[i]];
            for (std::size_t d = 0; d < dim; ++d) s[d] += vectors[i].vector[d];
            ++counts[result.assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) result.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    return result;
}

} // namespace mmkit::dedup
