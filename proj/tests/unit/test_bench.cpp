// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <map>
#include <set>

#include "mmkit/bench/item.hpp"
#include "mmkit/bench/prompt.hpp"
#include "mmkit/bench/runner.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/text.hpp"
#include "oracles.hpp"

using namespace mmkit;
using namespace mmkit::bench;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

std::vector<VqaItem> pool(std::size_t n, const std::string& dataset = "ds", std::size_t images_each = 1) {
    std::vector<VqaItem> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> imgs;
        for (std::size_t k = 0; k < images_each; ++k) imgs.push_back("img" + std::to_string(i) + "_" + std::to_string(k));
        out.push_back(oracle::vqa_item("item" + std::to_string(100 + i), dataset, imgs,
                                       "What organ is shown in view " + std::to_string(i) + "?", "liver"));
    }
    return out;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream f(p);
    for (const auto& l : lines) f << l << "\n";
}

} // namespace

TEST_CASE("load: empty file, round trip, duplicate id") {
    oracle::TempDir dir;
    write_lines(dir / "empty.jsonl", {});
    CHECK(load_dataset(dir / "empty.jsonl", DatasetFormat::VqaJsonl).empty());

    auto items = pool(3);
    items[1].split = Split::Test;
    save_dataset(dir / "three.jsonl", items);
    CHECK(load_dataset(dir / "three.jsonl", DatasetFormat::VqaJsonl) == items);

    auto dup = items;
    dup[2].item_id = dup[0].item_id;
    save_dataset(dir / "dup.jsonl", dup);
    try {
        load_dataset(dir / "dup.jsonl", DatasetFormat::VqaJsonl);
        FAIL("expected duplicate error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DuplicateId);
        CHECK(std::string(e.what()).find(items[0].item_id) != std::string::npos);
    }
    CHECK(load_dataset(MMKIT_FIXTURES_DIR "/vqa/items.jsonl", DatasetFormat::VqaJsonl).size() == 20);
}

TEST_CASE("load: schema rules per format") {
    auto u = load_dataset(MMKIT_FIXTURES_DIR "/usmle/items.jsonl", DatasetFormat::UsmleJsonl);
    CHECK(u.size() == 7);
    CHECK(kind_of([] { load_dataset(MMKIT_FIXTURES_DIR "/usmle/items.jsonl", DatasetFormat::VqaJsonl); }) ==
          ErrorKind::Schema);
    nlohmann::json j{{"item_id", "x"}, {"dataset", "d"}, {"image_ids", nlohmann::json::array()},
                     {"question", "q"}, {"answer", "a"}};
    CHECK(kind_of([&] { item_from_json(j, DatasetFormat::VqaJsonl); }) == ErrorKind::Schema);
    j["image_ids"] = {"i"};
    j["answer"] = "  ";
    CHECK(kind_of([&] { item_from_json(j, DatasetFormat::VqaJsonl); }) == ErrorKind::Schema);
    CHECK(default_shot_count(DatasetFormat::VqaJsonl) == 6);
    CHECK(default_shot_count(DatasetFormat::UsmleJsonl) == 4);
}

TEST_CASE("disjoint split: single item lands on one side at most") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto s = make_disjoint_split(pool(1), {0.9, 0.9, seed});
        CHECK(s.train.size() + s.test.size() + s.discarded.size() == 1);
        CHECK(s.train.size() + s.test.size() <= 1);
    }
}

TEST_CASE("disjoint split: discard fraction near 2*0.9*0.1") {
    double total = 0.0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
        auto s = make_disjoint_split(pool(1000), {0.9, 0.9, static_cast<std::uint64_t>(seed)});
        const double frac = static_cast<double>(s.discarded.size()) / 1000.0;
        CHECK(std::abs(frac - 0.18) <= 0.04);
        total += frac;
    }
    CHECK(std::abs(total / seeds - 0.18) <= 0.04);
}

TEST_CASE("disjoint split: no test image or question occurs in train") {
    DeterministicRng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<VqaItem> items;
        const auto n = 20 + rng.below(200);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::vector<std::string> imgs;
            const auto k = 1 + rng.below(3);
            for (std::uint64_t m = 0; m < k; ++m) imgs.push_back("im" + std::to_string(rng.below(n)));
            items.push_back(oracle::vqa_item("it" + std::to_string(i), "d", imgs,
                                             "Question " + std::to_string(rng.below(n / 2 + 1)), "a"));
        }
        auto s = make_disjoint_split(items, {0.9, 0.9, rng.next()});
        std::set<std::string> train_images, train_questions;
        for (const auto& it : s.train) {
            CHECK(it.split == Split::Train);
            train_images.insert(it.image_ids.begin(), it.image_ids.end());
            train_questions.insert(text::normalize_for_match(it.question));
        }
        for (const auto& it : s.test) {
            CHECK(it.split == Split::Test);
            for (const auto& img : it.image_ids) CHECK(train_images.count(img) == 0);
            CHECK(train_questions.count(text::normalize_for_match(it.question)) == 0);
        }
        CHECK(s.train.size() + s.test.size() + s.discarded.size() == items.size());
    }
    CHECK(kind_of([] { make_disjoint_split(pool(2), {1.0, 0.9, 0}); }) == ErrorKind::InvalidArgument);
    auto mixed = pool(2);
    mixed[1].dataset = "other";
    CHECK(kind_of([&] { make_disjoint_split(mixed, {}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("shots: seeded, order independent, whole pool") {
    auto p = pool(10);
    auto a = select_shots(p, 4, 1);
    CHECK(a == select_shots(p, 4, 1));
    auto reversed = p;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(select_shots(reversed, 4, 1) == a);
    bool differs = false;
    for (std::uint64_t s = 2; s < 10 && !differs; ++s) differs = select_shots(p, 4, s) != a;
    CHECK(differs);
    auto all = select_shots(p, 10, 3);
    std::set<std::string> ids;
    for (const auto& it : all) ids.insert(it.item_id);
    CHECK(ids.size() == 10);
    CHECK(kind_of([&] { select_shots(p, 11, 0); }) == ErrorKind::InvalidArgument);
    for (const auto& it : select_shots_for(p, 9, 5, p[3].item_id)) CHECK(it.item_id != p[3].item_id);
}

TEST_CASE("prompt: zero-shot is the target block alone") {
    WhitespaceTokenizer tok;
    auto target = oracle::vqa_item("t", "ds", {"ti"}, "Is it normal?", "yes", Split::Test);
    auto p = assemble_prompt(target, {}, PromptTemplate{}, 2048, tok);
    CHECK(media::render(p.stream) == "<image>Question: Is it normal? Answer:");
    CHECK(p.images.size() == 1);
    CHECK(p.blocks.size() == 1);
    CHECK(p.shot_item_ids.empty());
}

TEST_CASE("prompt: 6 shots give 7 blocks and shot-local attention") {
    WhitespaceTokenizer tok;
    auto shots = pool(6);
    for (auto& s : shots) s.split = Split::Train;
    auto target = oracle::vqa_item("t", "ds", {"ti"}, "Which lobe?", "left", Split::Test);
    auto p = assemble_prompt(target, shots, PromptTemplate{}, 2048, tok);
    REQUIRE(p.blocks.size() == 7);
    std::size_t eoc = 0;
    for (const auto& t : p.stream.tokens) eoc += t.kind == media::TokenKind::EndOfChunk;
    CHECK(eoc == 6);
    CHECK(p.stream.image_count() == 7);
    CHECK(p.media == media::assign_media_indices(p.stream));
    for (std::size_t j = 0; j < p.blocks.size(); ++j) {
        const auto& b = p.blocks[j];
        CHECK(b.first_image == j);
        for (std::size_t i = b.begin; i < b.end; ++i) {
            if (p.stream.tokens[i].kind == media::TokenKind::ImageMarker) continue;
            CHECK(p.media.attends[i] == std::optional<std::size_t>(j));
        }
    }
    CHECK(prompt_from_json(to_json(p)).stream == p.stream);
}

TEST_CASE("prompt: multi-image shots attend only within their own images") {
    WhitespaceTokenizer tok;
    auto shots = pool(4, "ds", 3);
    auto target = oracle::vqa_item("t", "ds", {"a", "b"}, "Q?", "A", Split::Test);
    auto p = assemble_prompt(target, shots, PromptTemplate{}, 2048, tok);
    for (const auto& b : p.blocks) {
        for (std::size_t i = b.begin; i < b.end; ++i) {
            const auto& a = p.media.attends[i];
            if (!a) continue;
            CHECK(*a >= b.first_image);
            CHECK(*a < b.first_image + b.image_count);
        }
    }
}

TEST_CASE("prompt: tight budget keeps the leading shots and the recount fits") {
    WhitespaceTokenizer tok;
    auto shots = pool(4);
    auto target = oracle::vqa_item("t", "ds", {"ti"}, "Which lobe?", "left", Split::Test);
    const auto full = assemble_prompt(target, shots, PromptTemplate{}, 100000, tok);
    const std::size_t target_len = full.blocks.back().end - full.blocks.back().begin;
    const std::size_t shot_len = full.blocks[0].end - full.blocks[0].begin;
    const std::size_t budget = target_len + 2 * shot_len + shot_len / 2;
    auto p = assemble_prompt(target, shots, PromptTemplate{}, budget, tok);
    REQUIRE(p.shot_item_ids.size() == 2);
    CHECK(p.shot_item_ids[0] == shots[0].item_id);
    CHECK(p.shot_item_ids[1] == shots[1].item_id);
    // Independent recount from the rendered text.
    const std::string rendered = media::render(p.stream);
    std::size_t recount = 0;
    for (const auto& w : oracle::words(rendered)) {
        std::size_t pos = 0;
        std::size_t specials = 0;
        std::string rest = w;
        for (const std::string_view mark : {media::kImagePlaceholder, media::kEndOfChunk}) {
            for (pos = rest.find(mark); pos != std::string::npos; pos = rest.find(mark)) {
                rest.erase(pos, mark.size());
                rest.insert(pos, " ");
                ++specials;
            }
        }
        recount += specials + oracle::words(rest).size();
    }
    CHECK(recount == p.stream.size());
    CHECK(recount <= budget);
}

TEST_CASE("prompt: drop-longest removes the longest shot first") {
    WhitespaceTokenizer tok;
    auto shots = pool(3);
    shots[1].question = "A much longer question that goes on and on about the film and its findings?";
    auto target = oracle::vqa_item("t", "ds", {"ti"}, "Q?", "A", Split::Test);
    PromptTemplate tmpl;
    tmpl.truncation = Truncation::DropLongest;
    const auto full = assemble_prompt(target, shots, tmpl, 100000, tok);
    auto p = assemble_prompt(target, shots, tmpl, full.stream.size() - 1, tok);
    CHECK(p.shot_item_ids == std::vector<std::string>{shots[0].item_id, shots[2].item_id});
}

TEST_CASE("prompt: leakage, dataset and budget guards") {
    WhitespaceTokenizer tok;
    auto target = oracle::vqa_item("t", "ds", {"ti"}, "Q?", "A", Split::Test);
    auto shots = pool(2);
    auto bad = shots;
    bad[1].split = Split::Test;
    CHECK(kind_of([&] { assemble_prompt(target, bad, {}, 2048, tok); }) == ErrorKind::Leakage);
    bad = shots;
    bad.push_back(target);
    bad.back().split = Split::Train;
    CHECK(kind_of([&] { assemble_prompt(target, bad, {}, 2048, tok); }) == ErrorKind::Leakage);
    bad = shots;
    bad[0].dataset = "elsewhere";
    CHECK(kind_of([&] { assemble_prompt(target, bad, {}, 2048, tok); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { assemble_prompt(target, shots, {}, 3, tok); }) == ErrorKind::Budget);
}

TEST_CASE("prompt: usmle rendering and shot summaries") {
    auto items = load_dataset(MMKIT_FIXTURES_DIR "/usmle/items.jsonl", DatasetFormat::UsmleJsonl);
    const auto& first = items[0];
    const auto q = render_question(first, false);
    CHECK(q.find(*first.vignette) == 0);
    CHECK(q.find("troponin I: 2.1 ng/mL") != std::string::npos);
    CHECK(q.size() > first.question.size());
    REQUIRE(first.shot_summary);
    CHECK(render_question(first, true) == first.shot_summary->question);
}

TEST_CASE("template json validation") {
    CHECK_NOTHROW(PromptTemplate::from_json({{"shot", "<image>Q: {q} A: {a}"}}));
    CHECK(kind_of([] { PromptTemplate::from_json({{"shot", "Q: {q} <image> A: {a}"}}); }) == ErrorKind::Schema);
    CHECK(kind_of([] { PromptTemplate::from_json({{"target", "Q: {q}"}}); }) == ErrorKind::Schema);
    CHECK(kind_of([] { PromptTemplate::from_json({{"truncation", "random"}}); }) == ErrorKind::Schema);
    auto t = PromptTemplate::from_json({{"truncation", "drop_longest"}});
    CHECK(PromptTemplate::from_json(t.to_json()).truncation == Truncation::DropLongest);
}

namespace {

std::vector<FewShotPrompt> zero_shot_prompts(const std::vector<VqaItem>& items) {
    WhitespaceTokenizer tok;
    std::vector<FewShotPrompt> out;
    for (const auto& it : items) out.push_back(assemble_prompt(it, {}, PromptTemplate{}, 2048, tok));
    return out;
}

struct FlakyRunner : ModelRunnerClient {
    explicit FlakyRunner(ModelRunnerClient& inner, int fail_after) : inner(inner), left(fail_after) {}
    RunnerReply generate(const nlohmann::json& request) override {
        if (left-- <= 0) throw Error(ErrorKind::Transport, "connection reset");
        return inner.generate(request);
    }
    ModelRunnerClient& inner;
    int left;
};

} // namespace

TEST_CASE("generate: echo and fixed runners") {
    auto items = pool(5);
    for (auto& it : items) it.answer = "answer for " + it.item_id;
    auto prompts = zero_shot_prompts(items);
    EchoRunner echo(items);
    auto gens = run_generation(prompts, echo, {}, {"echo", std::nullopt});
    REQUIRE(gens.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(gens[i].text == items[i].answer);
        CHECK(gens[i].mode == Mode::ZeroShot);
        CHECK_FALSE(gens[i].failed);
    }
    FixedRunner fixed("lung");
    for (const auto& g : run_generation(prompts, fixed, {}, {"fixed", Mode::FewShot})) {
        CHECK(g.text == "lung");
        CHECK(g.mode == Mode::FewShot);
    }
    auto req = make_runner_request(prompts[0], {});
    CHECK(req["item_id"] == items[0].item_id);
    CHECK(req.contains("tokens"));
    CHECK(req["stop"][0] == std::string(media::kEndOfChunk));
}

TEST_CASE("generate: interrupted run resumes to a complete census") {
    oracle::TempDir dir;
    auto items = pool(20);
    auto prompts = zero_shot_prompts(items);
    EchoRunner echo(items);
    DecodeConfig decode;
    decode.parallelism = 1;
    decode.retry = {1, std::chrono::milliseconds(1)};
    const auto results = dir / "gens.jsonl";

    FlakyRunner flaky(echo, 7);
    CHECK(kind_of([&] { run_generation(prompts, flaky, decode, {"m", std::nullopt}, results); }) ==
          ErrorKind::Transport);
    CHECK(load_generations(results).size() == 7);

    std::atomic<int> calls{0};
    struct Counting : ModelRunnerClient {
        Counting(ModelRunnerClient& in, std::atomic<int>& c) : in(in), c(c) {}
        RunnerReply generate(const nlohmann::json& r) override {
            ++c;
            return in.generate(r);
        }
        ModelRunnerClient& in;
        std::atomic<int>& c;
    } counting(echo, calls);
    decode.parallelism = 4;
    auto gens = run_generation(prompts, counting, decode, {"m", std::nullopt}, results);
    CHECK(calls.load() == 13);
    auto on_disk = load_generations(results);
    CHECK(on_disk == gens);
    std::map<std::string, int> census;
    for (const auto& g : on_disk) census[g.item_id]++;
    CHECK(census.size() == 20);
    for (const auto& [id, n] : census) CHECK(n == 1);
    CHECK(std::is_sorted(on_disk.begin(), on_disk.end(),
                         [](const Generation& a, const Generation& b) { return a.item_id < b.item_id; }));

    calls = 0;
    run_generation(prompts, counting, decode, {"m", std::nullopt}, results);
    CHECK(calls.load() == 0);
}

TEST_CASE("generate: a non-transport runner error fails only that item") {
    auto items = pool(3);
    auto prompts = zero_shot_prompts(items);
    struct Picky : ModelRunnerClient {
        RunnerReply generate(const nlohmann::json& r) override {
            if (r["item_id"] == "item101") throw Error(ErrorKind::Validation, "cannot handle");
            return {"ok", {}};
        }
    } picky;
    auto gens = run_generation(prompts, picky, {}, {"m", std::nullopt});
    REQUIRE(gens.size() == 3);
    CHECK(gens[1].failed);
    CHECK_FALSE(gens[0].failed);
    CHECK(generation_ref(gens[0]) == generation_ref(gens[0].item_id, "m", Mode::ZeroShot));
    const auto ref = generation_ref("i", "SecretModel", Mode::FewShot);
    CHECK(ref.find("SecretModel") == std::string::npos);
    CHECK(ref.find("few") == std::string::npos);
}

TEST_CASE("generate: remote runner over a child process") {
    oracle::TempDir dir;
    auto items = pool(4);
    save_dataset(dir / "gold.jsonl", items);
    auto prompts = zero_shot_prompts(items);
    RemoteRunner runner(make_transport(std::string(MMKIT_MOCK_RUNNER_PATH) + " --mode echo --gold " +
                                       (dir / "gold.jsonl").string()));
    auto gens = run_generation(prompts, runner, {}, {"echo", std::nullopt});
    REQUIRE(gens.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(gens[i].text == items[i].answer);
}
