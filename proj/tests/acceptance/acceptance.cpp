// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion; exits 1 if any fails.

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cli_runner.hpp"
#include "generators.hpp"
#include "mmkit/bench/item.hpp"
#include "mmkit/bench/prompt.hpp"
#include "mmkit/common/rng.hpp"
#include "mmkit/common/tokenizer.hpp"
#include "mmkit/corpus/pipeline.hpp"
#include "mmkit/dedup/embedding.hpp"
#include "mmkit/media/stream.hpp"
#include "mmkit/metrics/metrics.hpp"
#include "mmkit/rating/service.hpp"
#include "oracles.hpp"
#include "rating_fixture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmkit;

namespace {

const fs::path kCli = MMKIT_CLI_PATH;
const fs::path kFixtures = MMKIT_FIXTURES_DIR;
const fs::path kMock = MMKIT_MOCK_RUNNER_PATH;

// Pinned tolerances and budgets.
constexpr double kRankTol = 0.005;
constexpr double kMedFlamingoFewShotRank = 1.67;
constexpr double kOpenFlamingoZeroShotRank = 2.33;
constexpr double kRankSeconds = 1.0;

constexpr std::size_t kLeakEval = 6700;
constexpr std::size_t kLeakTrain = 6700;
constexpr std::size_t kLeakPlanted = 194;
constexpr std::size_t kLeakDim = 64;
constexpr double kLeakSeconds = 60.0;

constexpr std::size_t kSegDocs = 10000;
constexpr double kSplitSlack = 1.0;  // segments either side of the target
constexpr double kSegSeconds = 30.0;

constexpr std::size_t kMediaPrompts = 1000;
constexpr double kMediaSeconds = 10.0;

constexpr std::size_t kObjectiveInputs = 1000;
constexpr double kObjectiveTol = 1e-12;

constexpr std::size_t kEmFuzzCases = 10000;

constexpr double kE2eSeconds = 120.0;

constexpr std::size_t kRatingItems = 50;
constexpr std::size_t kRatingRaters = 10;
constexpr std::size_t kRatingThreads = 8;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// 1. Average clinical rank over the three published tables, via the CLI.
Outcome rank_reproduction() {
    Outcome o;
    oracle::TempDir dir;
    std::vector<std::string> args{"metrics", "rank", "--reports"};
    for (const char* t : {"vqa_rad.json", "path_vqa.json", "visual_usmle.json"})
        args.push_back((kFixtures / "tables" / t).string());
    args.insert(args.end(), {"--metric", "clinical"});
    const auto t0 = Clock::now();
    auto r = cli::run(kCli, args, dir.path());
    const double secs = since(t0);
    o.require(r.code == 0, "rank exited " + std::to_string(r.code));
    if (r.code != 0) return o;
    const auto ranks = json::parse(r.out);
    auto find = [&](const std::string& model, const std::string& mode) -> json {
        for (const auto& row : ranks.at("per_model"))
            if (row.at("model_id") == model && row.at("mode") == mode) return row;
        return nullptr;
    };
    const auto mf = find("Med-Flamingo", "few_shot");
    const auto of = find("OpenFlamingo", "zero_shot");
    const auto mv = find("MedVINT", "fine_tuned");
    o.require(!mf.is_null() && !of.is_null() && !mv.is_null(), "missing ranked model");
    if (!o.pass) return o;
    const double mf_rank = mf.at("avg_rank"), of_rank = of.at("avg_rank");
    o.require(std::abs(mf_rank - kMedFlamingoFewShotRank) <= kRankTol, "Med-Flamingo few-shot " + fmt("%.4f", mf_rank));
    o.require(std::abs(of_rank - kOpenFlamingoZeroShotRank) <= kRankTol, "OpenFlamingo zero-shot " + fmt("%.4f", of_rank));
    o.require(mv.at("datasets_counted") == 2, "MedVINT fine-tuned counted over " + mv.at("datasets_counted").dump());
    o.require(secs < kRankSeconds, "took " + fmt("%.3fs", secs));
    if (o.pass)
        o.detail = "MF few-shot " + fmt("%.4f", mf_rank) + ", OF zero-shot " + fmt("%.4f", of_rank) +
                   ", MedVINT fine-tuned over 2 datasets, " + fmt("%.3fs", secs);
    return o;
}

// Writes a 16x16 binary PGM built from an 8x8 grid of random cells, or a
// noisy copy of `base`. Returns the pixels.
std::vector<unsigned char> write_pgm(const fs::path& path, DeterministicRng& rng,
                                     const std::vector<unsigned char>* base = nullptr) {
    constexpr std::size_t side = 16;
    std::vector<unsigned char> px(side * side);
    if (base) {
        for (std::size_t i = 0; i < px.size(); ++i) {
            const int v = static_cast<int>((*base)[i]) + static_cast<int>(rng.below(13)) - 6;
            px[i] = static_cast<unsigned char>(std::clamp(v, 0, 255));
        }
    } else {
        std::vector<unsigned char> cells(64);
        for (auto& c : cells) c = static_cast<unsigned char>(rng.below(256));
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) px[y * side + x] = cells[(y / 2) * 8 + x / 2];
    }
    std::ofstream out(path, std::ios::binary);
    out << "P5\n" << side << " " << side << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    return px;
}

// 2. Planted near-duplicate images through embed -> knn -> threshold -> filter.
Outcome leakage() {
    Outcome o;
    oracle::TempDir dir;
    DeterministicRng rng(2024);
    std::vector<corpus::ImageRef> train_refs, eval_refs;
    std::vector<std::vector<unsigned char>> train_px;
    for (std::size_t i = 0; i < kLeakTrain; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "train_%06zu", i);
        const auto path = dir / (std::string(id) + ".pgm");
        train_px.push_back(write_pgm(path, rng));
        train_refs.push_back({id, "file://" + path.string()});
    }
    // Planted eval images sit at random positions and copy distinct train images.
    std::vector<std::size_t> positions(kLeakEval), sources(kLeakTrain);
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    for (std::size_t i = 0; i < sources.size(); ++i) sources[i] = i;
    rng.shuffle(std::span(positions));
    rng.shuffle(std::span(sources));
    std::map<std::size_t, std::size_t> planted_from;
    for (std::size_t j = 0; j < kLeakPlanted; ++j) planted_from[positions[j]] = sources[j];
    std::set<std::string> planted_ids;
    std::vector<bench::VqaItem> items;
    for (std::size_t i = 0; i < kLeakEval; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "eval_%06zu", i);
        const auto path = dir / (std::string(id) + ".pgm");
        const auto src = planted_from.find(i);
        write_pgm(path, rng, src == planted_from.end() ? nullptr : &train_px[src->second]);
        if (src != planted_from.end()) planted_ids.insert(id);
        eval_refs.push_back({id, "file://" + path.string()});
        auto item = oracle::vqa_item(std::string("q_") + id, "leak_ds", {id}, "What is shown?", "x", bench::Split::Test);
        item.image_uris = {eval_refs.back().uri};
        items.push_back(std::move(item));
    }

    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    const auto t0 = Clock::now();
    dedup::PixelEmbedder embedder(8);
    const auto train = dedup::embed_images(train_refs, embedder);
    const auto eval = dedup::embed_images(eval_refs, embedder);
    const auto pairs = dedup::knn_pairs(eval.vectors, train.vectors, dedup::kDefaultK, workers);
    const auto report = dedup::apply_threshold(pairs, dedup::kDefaultThreshold, eval.vectors.size());
    const auto kept = dedup::filter_eval_set(items, report);
    const double secs = since(t0);

    o.require(train.errors.empty() && eval.errors.empty(), "embedding errors");
    o.require(!eval.vectors.empty() && eval.vectors[0].dim() == kLeakDim, "embedding dim is not 64");
    const std::set<std::string> flagged(report.flagged.begin(), report.flagged.end());
    o.require(flagged == planted_ids, std::to_string(flagged.size()) + " flagged, planted set not matched");
    o.require(report.removed_count == kLeakPlanted, "removed " + std::to_string(report.removed_count));
    o.require(kept.size() == kLeakEval - kLeakPlanted, std::to_string(kept.size()) + " survivors");
    for (const auto& item : kept)
        if (planted_ids.count(item.image_ids[0])) o.require(false, "planted item survived: " + item.item_id);
    o.require(secs < kLeakSeconds, "chain took " + fmt("%.1fs", secs));

    const auto brute = oracle::brute_knn(eval.vectors, train.vectors, dedup::kDefaultK);
    o.require(gen::bit_equal(pairs, brute), "knn differs from the brute-force scan");
    if (o.pass)
        o.detail = std::to_string(flagged.size()) + " flagged, " + std::to_string(kept.size()) +
                   " survivors, knn bit-identical to brute force, chain " + fmt("%.1fs", secs);
    return o;
}

// 3. Segmentation invariants and the document-atomic split.
Outcome segmentation() {
    Outcome o;
    WhitespaceTokenizer tok;
    DeterministicRng rng(77);
    const auto t0 = Clock::now();
    std::vector<corpus::Segment> all;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < kSegDocs; ++i) {
        auto d = oracle::random_document(rng, "doc" + std::to_string(i));
        auto segs = corpus::segment_document(d, tok);
        std::vector<std::string> emitted;
        std::size_t images = 0;
        for (const auto& s : segs) {
            const auto r = oracle::recount(s.elements);
            if (r.images < 1 || r.images > corpus::kDefaultMaxImages || r.tokens > corpus::kDefaultMaxTokens ||
                r.tokens != s.token_count || r.images != s.image_count)
                ++bad;
            images += r.images;
            for (auto& w : oracle::flatten(s.elements)) emitted.push_back(std::move(w));
        }
        if (images != d.image_count() || !oracle::is_subsequence(emitted, oracle::flatten(d.elements))) ++bad;
        for (auto& s : segs) all.push_back(std::move(s));
    }
    const auto split = corpus::split_corpus(all, corpus::kDefaultTrainFraction, 5);
    const double secs = since(t0);

    o.require(bad == 0, std::to_string(bad) + " invariant violations");
    const double target = corpus::kDefaultTrainFraction * static_cast<double>(all.size());
    const double off = std::abs(static_cast<double>(split.train.size()) - target);
    o.require(split.train.size() + split.validation.size() == all.size(), "split loses segments");
    o.require(off <= kSplitSlack, fmt("train off target by %.2f segments", off));
    std::map<std::string, std::string> doc_of;
    for (const auto& s : all) doc_of[s.segment_id] = s.doc_id;
    std::set<std::string> train_docs, val_docs;
    for (const auto& id : split.train) train_docs.insert(doc_of.at(id));
    for (const auto& id : split.validation) val_docs.insert(doc_of.at(id));
    for (const auto& d : train_docs)
        if (val_docs.count(d)) {
            o.require(false, "document " + d + " straddles the split");
            break;
        }
    o.require(secs < kSegSeconds, "took " + fmt("%.1fs", secs));
    if (o.pass)
        o.detail = std::to_string(all.size()) + " segments, train " + std::to_string(split.train.size()) +
                   fmt(" (target %.2f)", target) + ", " + fmt("%.1fs", secs);
    return o;
}

// 4. Media indices of assembled few-shot prompts against the backward scan.
Outcome media_indices() {
    Outcome o;
    o.require(bench::default_shot_count(bench::DatasetFormat::VqaJsonl) == 6, "vqa default shots");
    o.require(bench::default_shot_count(bench::DatasetFormat::UsmleJsonl) == 4, "usmle default shots");
    WhitespaceTokenizer tok;
    DeterministicRng rng(78);
    std::vector<bench::VqaItem> pool;
    for (int i = 0; i < 200; ++i) {
        std::vector<std::string> imgs;
        const auto n = 1 + rng.below(3);
        for (std::uint64_t k = 0; k < n; ++k) imgs.push_back("p" + std::to_string(i) + "_" + std::to_string(k));
        std::string q = "Question";
        for (std::uint64_t w = rng.below(12); w > 0; --w) q += " w" + std::to_string(rng.below(50));
        pool.push_back(oracle::vqa_item("shot" + std::to_string(i), "media_ds", imgs, q + "?", "ans"));
    }
    const auto t0 = Clock::now();
    std::size_t mismatches = 0, shape = 0;
    for (std::size_t i = 0; i < kMediaPrompts; ++i) {
        const std::size_t k = 1 + rng.below(6);
        std::vector<bench::VqaItem> shots;
        std::set<std::size_t> used;
        while (shots.size() < k) {
            const auto j = rng.below(pool.size());
            if (used.insert(j).second) shots.push_back(pool[j]);
        }
        std::vector<std::string> timgs;
        for (std::uint64_t t = 1 + rng.below(2); t > 0; --t) timgs.push_back("t" + std::to_string(i) + "_" + std::to_string(t));
        auto target = oracle::vqa_item("target" + std::to_string(i), "media_ds", timgs, "What now?", "a",
                                       bench::Split::Test);
        const auto p = bench::assemble_prompt(target, shots, bench::PromptTemplate{}, 100000, tok);
        if (p.media.attends != oracle::backward_scan_attends(p.stream)) ++mismatches;
        if (p.blocks.size() != k + 1) ++shape;
    }
    const double secs = since(t0);
    o.require(mismatches == 0, std::to_string(mismatches) + " prompts disagree with the oracle");
    o.require(shape == 0, std::to_string(shape) + " prompts with the wrong block count");
    o.require(secs < kMediaSeconds, "took " + fmt("%.1fs", secs));
    if (o.pass) o.detail = std::to_string(kMediaPrompts) + " prompts agree, defaults 6/4, " + fmt("%.2fs", secs);
    return o;
}

// 5. Joint objective against the fold oracle.
Outcome objective() {
    Outcome o;
    o.require(media::kDefaultLambda == 1.0, "default lambda");
    DeterministicRng rng(79);
    double worst = 0.0;
    std::size_t linear = 0;
    for (std::size_t i = 0; i < kObjectiveInputs; ++i) {
        media::ObjectiveInputs in{gen::random_nll(rng, 1), gen::random_nll(rng, 1), rng.unit() * 4.0};
        const double got = media::joint_objective(in);
        const double want = oracle::fold_objective(in.paired_nll, in.interleaved_nll, in.lambda);
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
        const double j0 = media::joint_objective({in.paired_nll, in.interleaved_nll, 0.0});
        const double j1 = media::joint_objective({in.paired_nll, in.interleaved_nll, 1.0});
        if (std::abs(got - (j0 + in.lambda * (j1 - j0))) > kObjectiveTol * std::max(1.0, std::abs(got))) ++linear;
    }
    o.require(worst <= kObjectiveTol, fmt("worst relative error %.3g", worst));
    o.require(linear == 0, std::to_string(linear) + " inputs not linear in lambda");
    if (o.pass) o.detail = fmt("worst relative error %.3g", worst);
    return o;
}

// 6. Exact-match fuzz and BERT-sim fixed points.
Outcome metrics_checks() {
    Outcome o;
    DeterministicRng rng(80);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < kEmFuzzCases; ++i) {
        const auto s = gen::random_text(rng);
        const auto a = gen::perturb(rng, s), b = gen::perturb(rng, s);
        if (!metrics::exact_match(a, b) || !metrics::exact_match(b, s)) ++failures;
    }
    o.require(failures == 0, std::to_string(failures) + " exact-match failures");

    metrics::HashingTextEmbedder hashing;
    std::size_t not_one = 0;
    for (int i = 0; i < 500; ++i) {
        const auto t = gen::random_text(rng);
        if (metrics::bert_sim(t, t, hashing) != 1.0) ++not_one;
    }
    o.require(not_one == 0, std::to_string(not_one) + " identical pairs below 1");

    gen::TableEmbedder table;
    table.table["cand"] = {{1.0, 0.0}};
    table.table["ref"] = {{1.0, 0.0}, {0.0, 1.0}};
    table.table["ortho"] = {{0.0, 1.0}};
    o.require(metrics::bert_sim("cand", "ref", table) == 2.0 / 3.0, "hand case is not 2/3");
    o.require(metrics::bert_sim("cand", "ortho", table) == 0.0, "orthogonal case is not 0");
    if (o.pass) o.detail = std::to_string(kEmFuzzCases) + " EM cases, bert_sim(a,a)=1, F1 2/3, orthogonal 0";
    return o;
}

// 7. Fixture pipeline through the CLI.
Outcome end_to_end() {
    Outcome o;
    oracle::TempDir dir;
    cli::Pipeline p{kCli, kFixtures, kMock, dir.path(), {}};
    const auto t0 = Clock::now();
    try {
        p.run_all();
    } catch (const std::exception& e) {
        o.require(false, e.what());
        return o;
    }
    const double secs = since(t0);
    const auto report = p.json("report.json");
    const auto echo = cli::Pipeline::row(report, "echo");
    o.require(echo.at("exact_match").get<double>() == 1.0, "echo EM " + echo.at("exact_match").dump());
    o.require(std::abs(echo.at("bert_sim").get<double>() - 1.0) < 1e-12, "echo BERT " + echo.at("bert_sim").dump());
    for (const char* f : {"rank_em.json", "rank_bert.json"}) {
        const auto ranks = p.json(f);
        o.require(cli::Pipeline::row(ranks, "echo").at("avg_rank").get<double>() == 1.0,
                  std::string("echo not first in ") + f);
    }
    o.require(secs < kE2eSeconds, "took " + fmt("%.1fs", secs));
    if (o.pass) o.detail = "echo EM 1.0, BERT 1.0, rank 1 of 2, " + fmt("%.1fs", secs);
    return o;
}

// 8. Concurrent submissions with torn writes, lost acks and a kill; then a
// blinding scan of every rater-facing response.
Outcome rating_durability() {
    using namespace mmkit::rating;
    Outcome o;
    oracle::TempDir dir;
    auto data = oracle::make_rating_data(kRatingItems, {"alpha-model", "beta-model", "gamma-model"});
    oracle::write_rating_dir(dir.path(), data);
    const auto cfg = oracle::raters(kRatingRaters);
    ServiceOptions opts;
    opts.order_seed = 13;
    opts.fsync_each = false;
    opts.snapshot_every = 37;

    std::vector<std::pair<std::string, std::string>> work;
    for (std::size_t r = 0; r < kRatingRaters; ++r)
        for (const auto& item : data.items) work.emplace_back("rater" + std::to_string(r), item.item_id);

    std::atomic<int> torn{0}, lost{0};
    auto run_phase = [&](RatingService& svc, std::size_t begin, std::size_t end) {
        std::map<std::string, std::string> sessions;
        for (std::size_t r = 0; r < kRatingRaters; ++r) {
            const std::string id = "rater" + std::to_string(r);
            sessions[id] = svc.create_session(id, "tok" + std::to_string(r), "rate_ds").token;
        }
        std::atomic<std::size_t> next{begin};
        std::atomic<int> appends{0}, acks{0};
        svc.set_faults({[&] { return ++appends % 11 == 0 && (++torn, true); },
                        [&] {
                            if (++acks % 7 == 0) {
                                ++lost;
                                throw std::runtime_error("ack lost");
                            }
                        }});
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < kRatingThreads; ++t)
            threads.emplace_back([&] {
                for (std::size_t i = next++; i < end; i = next++) {
                    const auto& [rater, item] = work[i];
                    oracle::submit_until_acked(svc, sessions.at(rater), item,
                                               oracle::planned_payload(data, rater, item, 13));
                }
            });
        for (auto& th : threads) th.join();
        svc.set_faults({});
    };

    RatingState live;
    try {
        {
            RatingService svc(dir.path(), cfg, opts);
            run_phase(svc, 0, work.size() / 2);
            live = svc.state();
            std::ofstream f(svc.log_path(), std::ios::app);
            f << "{\"ts\":\"2026-01-01T00:00:00.000Z\",\"kind\":\"rating\",\"rater\":\"rater3\"";
        }
        RatingService svc(dir.path(), cfg, opts);
        o.require(svc.state() == live, "state after kill differs");
        run_phase(svc, work.size() / 2, work.size());
        live = svc.state();
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
        return o;
    }

    std::size_t lost_ratings = 0;
    for (const auto& [rater, item] : work) {
        const auto it = live.find({rater, item});
        if (it == live.end()) {
            ++lost_ratings;
            continue;
        }
        for (const auto& [label, ref] : oracle::label_map(data, rater, item, 13))
            if (it->second.scores.at(ref) != oracle::planned_score(rater, ref)) ++lost_ratings;
    }
    const auto events = EventLog::read(dir / "events.jsonl");
    std::set<std::tuple<std::string, std::string, std::string>> triples;
    std::size_t dups = 0;
    for (const auto& e : events)
        if (!triples.emplace(e.rater, e.item, e.gen_ref).second) ++dups;
    o.require(torn > 0 && lost > 0, "faults were not exercised");
    o.require(lost_ratings == 0, std::to_string(lost_ratings) + " ratings lost");
    o.require(dups == 0, std::to_string(dups) + " duplicate events");
    o.require(events.size() == work.size() * data.model_ids.size(), std::to_string(events.size()) + " events");
    o.require(replay(events) == live, "replay differs from live state");

    // Blinding: drive one rater through the HTTP API and scan every body.
    std::size_t violations = 0, bodies = 0;
    {
        oracle::TempDir hdir;
        auto hdata = oracle::make_rating_data(5, {"alpha-model", "beta-model", "gamma-model"});
        oracle::write_rating_dir(hdir.path(), hdata);
        RatingService svc(hdir.path(), oracle::raters(1), opts);
        HttpFrontend http(svc, {"127.0.0.1", 0, std::nullopt});
        const int port = http.bind();
        std::thread server([&] { http.listen(); });
        httplib::Client client("127.0.0.1", port);
        auto scan = [&](const std::string& body) {
            ++bodies;
            violations += oracle::blinding_violations(body, hdata).size();
        };
        auto sess = client.Post("/session", json{{"rater_id", "rater0"}, {"token", "tok0"}, {"dataset", "rate_ds"}}.dump(),
                                "application/json");
        if (sess && sess->status == 200) {
            scan(sess->body);
            const std::string token = json::parse(sess->body).at("session");
            for (int guard = 0; guard < 20; ++guard) {
                auto task = client.Get(("/task?session=" + token).c_str());
                if (!task || task->status != 200) break;
                scan(task->body);
                const auto j = json::parse(task->body);
                if (j.at("done").get<bool>()) break;
                json scores;
                for (const auto& c : j.at("task").at("candidates")) scores[c.at("blind_label").get<std::string>()] = 6;
                auto ack = client.Post("/rating",
                                       json{{"session", token}, {"item_id", j.at("task").at("item_id")}, {"scores", scores}}.dump(),
                                       "application/json");
                if (ack) scan(ack->body);
            }
        } else {
            o.require(false, "http session failed");
        }
        http.stop();
        server.join();
    }
    o.require(violations == 0, std::to_string(violations) + " blinding leaks");
    o.require(bodies >= 11, "only " + std::to_string(bodies) + " responses scanned");
    if (o.pass)
        o.detail = std::to_string(work.size()) + " submissions, " + std::to_string(torn.load()) + " torn writes, " +
                   std::to_string(lost.load()) + " lost acks, 0 lost, 0 duplicates, replay == live, " +
                   std::to_string(bodies) + " responses blind";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"rank-reproduction", rank_reproduction}, {"leakage-filter", leakage},
        {"segmentation", segmentation},           {"media-indices", media_indices},
        {"joint-objective", objective},           {"metrics", metrics_checks},
        {"end-to-end", end_to_end},               {"rating-durability", rating_durability},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
