// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cli_runner.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kCli = MMKIT_CLI_PATH;
const fs::path kFixtures = MMKIT_FIXTURES_DIR;
const fs::path kMock = MMKIT_MOCK_RUNNER_PATH;

cli::Result run_cli(const oracle::TempDir& dir, std::vector<std::string> args) {
    return cli::run(kCli, args, dir.path());
}

} // namespace

TEST_CASE("help and version exit 0") {
    oracle::TempDir dir;
    auto help = run_cli(dir, {"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("corpus") != std::string::npos);
    CHECK(help.out.find("serve") != std::string::npos);
    CHECK(run_cli(dir, {"bench", "generate", "--help"}).code == 0);
    auto v = run_cli(dir, {"--version"});
    CHECK(v.code == 0);
    CHECK_FALSE(v.out.empty());
}

TEST_CASE("usage errors exit 2") {
    oracle::TempDir dir;
    CHECK(run_cli(dir, {}).code == 2);
    CHECK(run_cli(dir, {"frobnicate"}).code == 2);
    CHECK(run_cli(dir, {"corpus", "parse", "--bogus-flag"}).code == 2);
    CHECK(run_cli(dir, {"corpus", "parse", "-o", "x.jsonl"}).code == 2);  // missing -i
    CHECK(run_cli(dir, {"corpus", "clean", "-i", "does-not-exist.jsonl", "-o", "x.jsonl"}).code == 2);
    // mutually exclusive runners
    CHECK(run_cli(dir, {"bench", "generate", "--prompts", (kFixtures / "vqa/test.jsonl").string(), "-o", "g.jsonl",
                      "--model-id", "m", "--runner", "echo", "--runner-url", "cat"})
              .code == 2);
}

TEST_CASE("json error mode") {
    oracle::TempDir dir;
    auto usage = run_cli(dir, {"--json", "corpus", "parse", "-o", "x.jsonl"});
    CHECK(usage.code == 2);
    auto j = json::parse(usage.err.substr(0, usage.err.find('\n')));
    CHECK(j.at("error").at("kind") == "usage");
    CHECK(j.at("error").at("exit_code") == 2);

    // documents are not segments: a domain error
    auto domain = run_cli(dir, {"--json", "corpus", "split", "-i", (kFixtures / "vqa/items.jsonl").string(), "-o",
                              "split.json"});
    CHECK(domain.code == 1);
    auto d = json::parse(domain.err.substr(0, domain.err.find('\n')));
    CHECK(d.at("error").at("exit_code") == 1);
    CHECK(d.at("error").at("kind") != "usage");
    CHECK_FALSE(fs::exists(dir / "split.json"));
}

TEST_CASE("manifest is written beside outputs") {
    oracle::TempDir dir;
    auto r = run_cli(dir, {"corpus", "parse", "-i", (kFixtures / "html").string(), "-o", "docs.jsonl"});
    REQUIRE(r.code == 0);
    auto summary = json::parse(r.out);
    CHECK(summary.at("documents") == 3);
    auto m = json::parse(cli::slurp(dir / "docs.jsonl.manifest.json"));
    CHECK(m.at("tool_version").is_string());
    CHECK(m.at("inputs").size() == 3);
    for (auto& [path, digest] : m.at("inputs").items()) CHECK(digest.get<std::string>().size() == 64);
    CHECK(m.at("command_line").at(1) == "corpus");
    CHECK(m.at("config").get<std::string>().find("corpus.parse.out=\"docs.jsonl\"") != std::string::npos);

    // bench split writes a directory; its manifest sits inside
    auto s = run_cli(dir, {"bench", "split", "--dataset", (kFixtures / "vqa/items.jsonl").string(), "--out-dir",
                         "bsplit", "--seed", "5"});
    REQUIRE(s.code == 0);
    CHECK(fs::exists(dir / "bsplit/manifest.json"));
    CHECK(fs::exists(dir / "bsplit/train.jsonl"));
    CHECK(fs::exists(dir / "bsplit/test.jsonl"));
    CHECK(json::parse(cli::slurp(dir / "bsplit/manifest.json")).at("seeds").at("split") == 5);
}

TEST_CASE("config file supplies defaults") {
    oracle::TempDir dir;
    {
        std::ofstream cfg(dir / "run.toml");
        cfg << "[corpus.segment]\nmax-tokens = 12\n";
    }
    REQUIRE(run_cli(dir, {"corpus", "parse", "-i", (kFixtures / "html").string(), "-o", "docs.jsonl"}).code == 0);
    REQUIRE(run_cli(dir, {"--config", "run.toml", "corpus", "segment", "-i", "docs.jsonl", "-o", "segs.jsonl"}).code ==
            0);
    auto m = json::parse(cli::slurp(dir / "segs.jsonl.manifest.json"));
    CHECK(m.at("config").get<std::string>().find("corpus.segment.max-tokens=12") != std::string::npos);
}

TEST_CASE("pipeline end to end") {
    oracle::TempDir dir;
    cli::Pipeline p{kCli, kFixtures, kMock, dir.path(), {}};
    REQUIRE_NOTHROW(p.run_all());

    auto split = p.json("split.json");
    CHECK(split.at("train").size() + split.at("validation").size() == 3);

    auto leak = p.json("leakage.json");
    CHECK(leak.at("total_eval") == 8);

    auto report = p.json("report.json");
    auto echo = cli::Pipeline::row(report, "echo");
    auto fixed = cli::Pipeline::row(report, "fixed");
    CHECK(echo.at("exact_match").get<double>() == doctest::Approx(1.0));
    CHECK(echo.at("bert_sim").get<double>() == doctest::Approx(1.0));
    CHECK(fixed.at("exact_match").get<double>() < 1.0);
    CHECK(echo.at("n_items") == 8);

    for (const char* rank_file : {"rank_em.json", "rank_bert.json"}) {
        auto ranks = p.json(rank_file);
        CHECK(cli::Pipeline::row(ranks, "echo").at("avg_rank").get<double>() == 1.0);
        CHECK(cli::Pipeline::row(ranks, "fixed").at("avg_rank").get<double>() == 2.0);
    }
    auto csv = cli::slurp(dir / "report.csv");
    CHECK(csv.rfind("model,Clinical eval. score,BERT-sim,Exact-match\n", 0) == 0);
    CHECK(csv.find("echo few-shot,,1.000,1.000") != std::string::npos);
}

namespace {

// Generation records carry a wall-clock created_at; everything else is fixed.
std::string without_created_at(const std::string& jsonl) {
    std::string out;
    std::istringstream in(jsonl);
    for (std::string line; std::getline(in, line);) {
        auto j = json::parse(line);
        REQUIRE(j.contains("created_at"));
        j.erase("created_at");
        out += j.dump() + "\n";
    }
    return out;
}

} // namespace

TEST_CASE("deterministic rerun is byte-identical") {
    oracle::TempDir a, b;
    cli::Pipeline pa{kCli, kFixtures, kMock, a.path(), {}};
    cli::Pipeline pb{kCli, kFixtures, kMock, b.path(), {}};
    REQUIRE_NOTHROW(pa.run_all());
    REQUIRE_NOTHROW(pb.run_all());
    for (std::string f : {"docs.jsonl", "clean.jsonl", "segments.jsonl", "split.json", "titles.csv", "train.bin",
                          "pairs.jsonl", "leakage.json", "test_clean.jsonl", "prompts.jsonl", "report.json",
                          "report.csv", "rank_em.json", "rank_bert.json"}) {
        CAPTURE(f);
        CHECK(cli::slurp(a / f) == cli::slurp(b / f));
    }
    for (std::string f : {"echo.jsonl", "fixed.jsonl"}) {
        CAPTURE(f);
        CHECK(without_created_at(cli::slurp(a / f)) == without_created_at(cli::slurp(b / f)));
    }
}

TEST_CASE("generate resumes without rerunning finished items") {
    oracle::TempDir dir;
    cli::Pipeline p{kCli, kFixtures, kMock, dir.path(), {}};
    REQUIRE_NOTHROW(p.run_all());
    auto before = cli::slurp(dir / "fixed.jsonl");
    auto again = run_cli(dir, {"bench", "generate", "--prompts", "prompts.jsonl", "-o", "fixed.jsonl", "--model-id",
                             "fixed", "--runner", "fixed", "--fixed-text", "no"});
    REQUIRE(again.code == 0);
    CHECK(cli::slurp(dir / "fixed.jsonl") == before);
}

TEST_CASE("rank over published tables") {
    oracle::TempDir dir;
    std::vector<std::string> args{"metrics", "rank", "--reports"};
    for (const char* t : {"vqa_rad.json", "path_vqa.json", "visual_usmle.json"})
        args.push_back((kFixtures / "tables" / t).string());
    args.insert(args.end(), {"--metric", "clinical"});
    auto r = run_cli(dir, args);
    REQUIRE(r.code == 0);
    auto ranks = json::parse(r.out);
    bool found = false;
    for (const auto& row : ranks.at("per_model"))
        if (row.at("model_id") == "Med-Flamingo" && row.at("mode") == "few_shot") {
            found = true;
            CHECK(row.at("avg_rank").get<double>() == doctest::Approx(5.0 / 3.0));
        }
    CHECK(found);
}
