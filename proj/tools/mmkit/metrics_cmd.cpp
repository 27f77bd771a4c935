// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <iostream>
#include <set>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/metrics/metrics.hpp"
#include "mmkit/rating/service.hpp"

namespace mmkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MetricsFlags {
    std::string dataset;
    fs::path gold;
    std::string format = "vqa_jsonl";
    std::vector<fs::path> generations;
    std::vector<fs::path> ratings;
    std::vector<fs::path> reports;
    bool no_exact_match = false;
    bool no_bert_sim = false;
    std::string embedder;
    std::string metric = "clinical";
    fs::path out;
    std::optional<fs::path> csv;
    fs::path report;
    fs::path data_dir;
    fs::path out_dir;
};

} // namespace

void add_metrics(CLI::App& app, Context& ctx) {
    auto* metrics_cmd = app.add_subcommand("metrics", "Score generations and rank models");
    metrics_cmd->require_subcommand(1);
    auto flags = std::make_shared<MetricsFlags>();

    auto* score = metrics_cmd->add_subcommand("score", "Clinical, BERT-sim and exact-match scores per model and mode");
    score->add_option("--dataset", flags->dataset, "Dataset name the report covers")->required();
    score->add_option("--gold", flags->gold, "Dataset JSONL with the reference answers")->required()->check(CLI::ExistingFile);
    score->add_option("--format", flags->format, "Gold dataset format")
        ->check(CLI::IsMember({"vqa_jsonl", "usmle_jsonl"}))
        ->capture_default_str();
    score->add_option("--generations", flags->generations, "Generations JSONL files")->required()->check(CLI::ExistingFile);
    score->add_option("--ratings", flags->ratings, "Rating JSONL files (e.g. a rating export)")->check(CLI::ExistingFile);
    score->add_flag("--no-exact-match", flags->no_exact_match, "Omit exact-match");
    score->add_flag("--no-bert-sim", flags->no_bert_sim, "Omit BERT-sim");
    score->add_option("--embedder-url", flags->embedder,
                      "Token embedder: http(s) URL or a line-JSON command; default built-in hashing embedder");
    score->add_option("--out,-o", flags->out, "Output report JSON")->required();
    score->add_option("--csv", flags->csv, "Also write the report as a CSV table");
    score->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->gold);
        std::vector<bench::VqaItem> gold;
        for (auto& item : bench::load_dataset(flags->gold, bench::format_from_string(flags->format)))
            if (item.dataset == flags->dataset) gold.push_back(std::move(item));
        if (gold.empty()) throw Error(ErrorKind::InvalidArgument, "no gold items belong to dataset '" + flags->dataset + "'");
        std::set<std::string> gold_ids;
        for (const auto& item : gold) gold_ids.insert(item.item_id);

        std::vector<bench::Generation> generations;
        for (const auto& path : flags->generations) {
            manifest.input(path);
            for (auto& g : bench::load_generations(path)) generations.push_back(std::move(g));
        }
        std::vector<metrics::Rating> ratings;
        std::size_t other = 0;
        for (const auto& path : flags->ratings) {
            manifest.input(path);
            io::for_each_jsonl(path, [&](std::size_t, const json& j) {
                auto r = metrics::rating_from_json(j);
                if (gold_ids.count(r.item_id)) ratings.push_back(std::move(r));
                else ++other;
            });
        }
        if (other > 0) spdlog::info("ignored {} ratings for items outside '{}'", other, flags->dataset);

        std::unique_ptr<metrics::TextEmbedderClient> embedder;
        if (!flags->no_bert_sim) {
            if (flags->embedder.empty()) embedder = std::make_unique<metrics::HashingTextEmbedder>();
            else embedder = std::make_unique<metrics::RemoteTextEmbedder>(make_transport(flags->embedder));
        }
        metrics::ReportOptions options;
        options.exact_match = !flags->no_exact_match;
        options.bert_sim = !flags->no_bert_sim;
        const auto report = metrics::build_report(flags->dataset, generations, gold, ratings, embedder.get(), options);
        io::write_json_atomic(flags->out, metrics::to_json(report));
        if (flags->csv) io::write_file_atomic(*flags->csv, metrics::to_csv(report, options.exact_match));
        manifest.write_next_to(flags->out);
        emit(metrics::to_json(report));
    });

    auto* rank = metrics_cmd->add_subcommand("rank", "Average rank of each model across dataset reports");
    rank->add_option("--reports", flags->reports, "Report JSON files, one per dataset")->required()->check(CLI::ExistingFile);
    rank->add_option("--metric", flags->metric, "Metric to rank by")
        ->check(CLI::IsMember({"clinical", "bert_sim", "exact_match"}))
        ->capture_default_str();
    rank->add_option("--out,-o", flags->out, "Output ranks JSON (printed to stdout when omitted)");
    rank->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        std::vector<metrics::MetricsReport> reports;
        for (const auto& path : flags->reports) {
            manifest.input(path);
            reports.push_back(metrics::report_from_json(io::read_json(path)));
        }
        const auto summary = metrics::average_rank(reports, metrics::metric_from_string(flags->metric));
        const json out = metrics::to_json(summary);
        if (!flags->out.empty()) {
            io::write_json_atomic(flags->out, out);
            manifest.write_next_to(flags->out);
        }
        emit(out);
    });

    auto* exp = metrics_cmd->add_subcommand("export", "Write a report as a table, or export collected ratings");
    auto* report_opt = exp->add_option("--report", flags->report, "Report JSON to render as CSV")->check(CLI::ExistingFile);
    auto* data_opt = exp->add_option("--data-dir", flags->data_dir, "Rating service data directory")
                         ->check(CLI::ExistingDirectory)
                         ->excludes(report_opt);
    exp->add_option("--dataset", flags->dataset, "Dataset to export ratings for")->needs(data_opt);
    exp->add_flag("--no-exact-match", flags->no_exact_match, "Omit the exact-match column");
    exp->add_option("--out,-o", flags->out, "CSV path (--report) or output directory (--data-dir)")->required();
    exp->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        if (!flags->report.empty()) {
            manifest.input(flags->report);
            const auto report = metrics::report_from_json(io::read_json(flags->report));
            io::write_file_atomic(flags->out, metrics::to_csv(report, !flags->no_exact_match));
            manifest.write_next_to(flags->out);
            emit({{"models", report.per_model.size()}, {"out", flags->out.string()}});
            return;
        }
        if (flags->data_dir.empty()) throw Error(ErrorKind::InvalidArgument, "give --report or --data-dir");
        if (flags->dataset.empty()) throw Error(ErrorKind::InvalidArgument, "--data-dir needs --dataset");
        manifest.input(flags->data_dir / "items.jsonl");
        manifest.input(flags->data_dir / "generations.jsonl");
        manifest.input(flags->data_dir / "events.jsonl");
        const auto e = rating::export_offline(flags->data_dir, flags->dataset);
        fs::create_directories(flags->out);
        io::write_file_atomic(flags->out / "ratings.jsonl", rating::export_ratings_jsonl(e));
        io::write_json_atomic(flags->out / "clinical_summary.json", e.summary);
        manifest.write_into(flags->out);
        emit({{"ratings", e.ratings.size()}, {"summary", e.summary}});
    });
}

} // namespace mmkit::cli
