// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>

#include "mmkit/bench/prompt.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/hash.hpp"
#include "mmkit/common/rng.hpp"
#include "mmkit/common/text.hpp"

namespace mmkit::bench {
namespace {

bool in_train_partition(std::string_view domain, const std::string& key, double fraction, std::uint64_t seed) {
    std::string salted(domain);
    salted.push_back('\x1f');
    salted += key;
    return hash::to_unit(hash::keyed(salted, seed)) < fraction;
}

void check_fraction(double f, const char* name) {
    if (!(f > 0.0 && f < 1.0)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " must lie in (0, 1)");
}

} // namespace

DisjointSplit make_disjoint_split(const std::vector<VqaItem>& items, const SplitSpec& spec) {
    check_fraction(spec.image_train_fraction, "image_train_fraction");
    check_fraction(spec.question_train_fraction, "question_train_fraction");
    std::set<std::string> datasets;
    std::set<std::string> images;
    for (const auto& item : items) {
        datasets.insert(item.dataset);
        images.insert(item.image_ids.begin(), item.image_ids.end());
    }
    if (datasets.size() > 1) throw Error(ErrorKind::InvalidArgument, "items span more than one dataset");
    if (items.size() > 1 && images.size() == 1)
        throw Error(ErrorKind::SplitImpossible, "all items share a single image; images cannot be partitioned");

    DisjointSplit out;
    for (const auto& item : items) {
        const bool question_train =
            in_train_partition("q", text::normalize_for_match(item.question), spec.question_train_fraction, spec.seed);
        std::size_t train_images = 0;
        for (const auto& id : item.image_ids)
            train_images += in_train_partition("img", id, spec.image_train_fraction, spec.seed);
        VqaItem assigned = item;
        if (question_train && train_images == item.image_ids.size()) {
            assigned.split = Split::Train;
            out.train.push_back(std::move(assigned));
        } else if (!question_train && train_images == 0) {
            assigned.split = Split::Test;
            out.test.push_back(std::move(assigned));
        } else {
            out.discarded.push_back(std::move(assigned));
        }
    }
    return out;
}

std::vector<VqaItem> select_shots(const std::vector<VqaItem>& train, std::size_t n, std::uint64_t seed,
                                  ShotStrategy /*strategy*/) {
    if (n > train.size())
        throw Error(ErrorKind::InvalidArgument, "requested " + std::to_string(n) + " shots from a pool of " +
                                                    std::to_string(train.size()));
    std::vector<const VqaItem*> pool;
    pool.reserve(train.size());
    for (const auto& item : train) pool.push_back(&item);
    std::sort(pool.begin(), pool.end(), [](const VqaItem* a, const VqaItem* b) { return a->item_id < b->item_id; });
    DeterministicRng rng(seed);
    rng.shuffle(std::span(pool));
    std::vector<VqaItem> shots;
    shots.reserve(n);
    for (std::size_t i = 0; i < n; ++i) shots.push_back(*pool[i]);
    return shots;
}

std::vector<VqaItem> select_shots_for(const std::vector<VqaItem>& train, std::size_t n, std::uint64_t seed,
                                      const std::string& target_item_id) {
    std::vector<VqaItem> pool;
    for (const auto& item : train)
        if (item.item_id != target_item_id) pool.push_back(item);
    return select_shots(pool, n, hash::keyed(target_item_id, seed));
}

} // namespace mmkit::bench
