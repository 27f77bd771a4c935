// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/rng.hpp"
#include "mmkit/media/stream.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace mmkit;
using namespace mmkit::media;

using gen::random_nll;
using gen::random_stream;

namespace {

TokenStream of(const std::string& pattern) {
    TokenStream s;
    for (char c : pattern) {
        if (c == 'I') s.tokens.push_back(Token::image());
        if (c == 'T') s.tokens.push_back(Token::text(1, "w"));
        if (c == 'E') s.tokens.push_back(Token::end_of_chunk());
    }
    return s;
}

} // namespace

TEST_CASE("text-only stream attends to nothing") {
    auto m = assign_media_indices(of("TT"));
    CHECK(m.attends == std::vector<std::optional<std::size_t>>{std::nullopt, std::nullopt});
    CHECK(m.loss_mask == std::vector<bool>{true, true});
}

TEST_CASE("most recent preceding image, none on markers") {
    auto m = assign_media_indices(of("ITTIT"));
    using O = std::optional<std::size_t>;
    CHECK(m.attends == std::vector<O>{std::nullopt, O(0), O(0), std::nullopt, O(1)});
    CHECK(m.loss_mask == std::vector<bool>{false, true, true, false, true});
}

TEST_CASE("end of chunk does not reset attention") {
    auto m = assign_media_indices(of("ITET"));
    CHECK(m.attends[2] == std::optional<std::size_t>(0));
    CHECK(m.attends[3] == std::optional<std::size_t>(0));
    CHECK(m.loss_mask[2]);
}

TEST_CASE("random streams match the backward-scan oracle") {
    DeterministicRng rng(11);
    for (int i = 0; i < 2000; ++i) {
        auto s = random_stream(rng, 200);
        auto m = assign_media_indices(s);
        CHECK(m.attends == oracle::backward_scan_attends(s));
        for (std::size_t p = 0; p < s.size(); ++p)
            CHECK(m.loss_mask[p] == (s.tokens[p].kind != TokenKind::ImageMarker));
    }
}

TEST_CASE("attends is prefix-stable") {
    DeterministicRng rng(12);
    for (int i = 0; i < 300; ++i) {
        auto a = random_stream(rng, 100);
        auto b = a;
        b.append(random_stream(rng, 100));
        auto ma = assign_media_indices(a);
        auto mb = assign_media_indices(b);
        CHECK(std::equal(ma.attends.begin(), ma.attends.end(), mb.attends.begin()));
    }
}

TEST_CASE("concatenated examples each starting with an image stay separate") {
    DeterministicRng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        TokenStream s;
        std::vector<std::size_t> example_of;
        const auto k = 1 + rng.below(8);
        for (std::size_t j = 0; j < k; ++j) {
            s.tokens.push_back(Token::image());
            example_of.push_back(j);
            const auto len = 1 + rng.below(30);
            for (std::uint64_t t = 0; t < len; ++t) {
                s.tokens.push_back(Token::text(7));
                example_of.push_back(j);
            }
            s.tokens.push_back(Token::end_of_chunk());
            example_of.push_back(j);
        }
        auto m = assign_media_indices(s);
        for (std::size_t p = 0; p < s.size(); ++p)
            if (s.tokens[p].kind != TokenKind::ImageMarker) CHECK(m.attends[p] == example_of[p]);
    }
}

TEST_CASE("validate checks marker count") {
    CHECK_NOTHROW(validate(of("ITT"), 1));
    CHECK_THROWS_AS(validate(of("ITT"), 2), Error);
    CHECK_THROWS_AS(validate(TokenStream{}, 0), Error);
}

TEST_CASE("render and json round-trip") {
    TokenStream s;
    s.tokens = {Token::image(), Token::text(5, "Question:"), Token::text(6), Token::end_of_chunk()};
    CHECK(render(s) == "<image>Question: 6<|endofchunk|>");
    CHECK(stream_from_json(to_json(s)) == s);
    auto m = assign_media_indices(s);
    CHECK(media_from_json(to_json(m)) == m);
    auto j = to_json(s);
    CHECK(j["tokens"][0]["k"] == "img");
    CHECK(j["tokens"][3]["k"] == "eoc");
    CHECK_THROWS_AS(stream_from_json(nlohmann::json{{"tokens", {{{"k", "zz"}}}}}), Error);
}

TEST_CASE("joint objective hand values") {
    CHECK(kDefaultLambda == 1.0);
    CHECK(joint_objective({{1.0, 3.0}, {3.0}, 1.0}) == 5.0);
    CHECK(joint_objective({{2.0}, {3.0, 3.0}}) == 5.0);
    CHECK(joint_objective({{1.0, 3.0}, {}, 0.0}) == 2.0);
    CHECK_THROWS_AS(joint_objective({{}, {1.0}, 1.0}), Error);
    CHECK_THROWS_AS(joint_objective({{1.0}, {}, 0.5}), Error);
    CHECK_THROWS_AS(joint_objective({{1.0}, {1.0}, -1.0}), Error);
    CHECK_THROWS_AS(joint_objective({{-1.0}, {1.0}, 1.0}), Error);
}

TEST_CASE("joint objective agrees with the fold oracle and is linear in lambda") {
    DeterministicRng rng(14);
    for (int i = 0; i < 1000; ++i) {
        ObjectiveInputs in{random_nll(rng, 1), random_nll(rng, 1), rng.unit() * 4.0};
        const double got = joint_objective(in);
        CHECK(std::abs(got - oracle::fold_objective(in.paired_nll, in.interleaved_nll, in.lambda)) <= 1e-12 * std::max(1.0, std::abs(got)));

        const double j0 = joint_objective({in.paired_nll, in.interleaved_nll, 0.0});
        const double j1 = joint_objective({in.paired_nll, in.interleaved_nll, 1.0});
        CHECK(std::abs(got - (j0 + in.lambda * (j1 - j0))) <= 1e-12 * std::max(1.0, std::abs(got)));
        CHECK(j1 == joint_objective({in.interleaved_nll, in.paired_nll, 1.0}));
    }
}

TEST_CASE("sequence nll") {
    const std::vector<double> lp{-1.0, -1.0};
    CHECK(sequence_nll(lp, {true, true}) == 2.0);
    CHECK(sequence_nll(lp, {false, false}) == 0.0);
    CHECK_THROWS_AS(sequence_nll(lp, {true}), Error);

    DeterministicRng rng(15);
    for (int i = 0; i < 500; ++i) {
        const auto n = rng.below(60), m = rng.below(60);
        std::vector<double> a(n), b(m);
        std::vector<bool> ma(n), mb(m);
        for (std::size_t t = 0; t < n; ++t) {
            a[t] = -rng.unit() * 10;
            ma[t] = rng.below(2);
        }
        for (std::size_t t = 0; t < m; ++t) {
            b[t] = -rng.unit() * 10;
            mb[t] = rng.below(2);
        }
        double loop = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            if (ma[t]) loop -= a[t];
        CHECK(std::abs(sequence_nll(a, ma) - loop) <= 1e-12 * std::max(1.0, loop));

        std::vector<double> ab(a);
        ab.insert(ab.end(), b.begin(), b.end());
        std::vector<bool> mab(ma);
        mab.insert(mab.end(), mb.begin(), mb.end());
        const double whole = sequence_nll(ab, mab);
        CHECK(std::abs(whole - (sequence_nll(a, ma) + sequence_nll(b, mb))) <= 1e-12 * std::max(1.0, whole));
    }
}
