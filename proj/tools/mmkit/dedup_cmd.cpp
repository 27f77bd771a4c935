// SPDX-License-Identifier: Apache-2.0
#include <set>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/corpus/document.hpp"
#include "mmkit/dedup/embedding.hpp"

namespace mmkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DedupFlags {
    fs::path input;
    fs::path out;
    std::string from = "auto";
    std::string format = "vqa_jsonl";
    std::string embedder;
    std::size_t grid = 8;
    std::size_t batch = 16;
    fs::path eval;
    fs::path train;
    fs::path pairs;
    fs::path report;
    std::optional<fs::path> image_root;
    std::size_t k = dedup::kDefaultK;
    double threshold = dedup::kDefaultThreshold;
    std::size_t total_eval = 0;
    std::size_t clusters = dedup::kDefaultClusters;
    std::size_t max_iters = 100;
    std::uint64_t seed = 0;
};

// Relative file URIs are taken relative to the listing that names them.
std::string resolve_uri(const std::string& uri, const fs::path& base) {
    if (uri.find("://") != std::string::npos) return uri;
    const fs::path p(uri);
    if (p.is_relative() && fs::exists(base / p)) return (base / p).string();
    return uri;
}

std::vector<corpus::ImageRef> collect_images(const DedupFlags& f) {
    const fs::path base = f.image_root.value_or(f.input.parent_path());
    std::vector<corpus::ImageRef> images;
    std::set<std::string> seen;
    auto add = [&](const std::string& id, const std::string& uri) {
        if (seen.insert(id).second) images.push_back({id, resolve_uri(uri, base)});
    };
    auto add_elements = [&](const std::vector<corpus::Element>& elements) {
        for (const auto& e : elements)
            if (const auto* img = std::get_if<corpus::ImageRef>(&e)) add(img->image_id, img->uri);
    };
    io::for_each_jsonl(f.input, [&](std::size_t line, const json& j) {
        std::string kind = f.from;
        if (kind == "auto") {
            if (j.contains("item_id")) kind = "dataset";
            else if (j.contains("segment_id")) kind = "segments";
            else if (j.contains("doc_id")) kind = "documents";
            else throw Error(ErrorKind::Schema, f.input.string() + ":" + std::to_string(line) + ": unrecognized record");
        }
        if (kind == "dataset") {
            const auto item = bench::item_from_json(j, bench::format_from_string(f.format));
            for (std::size_t i = 0; i < item.image_ids.size(); ++i) add(item.image_ids[i], item.image_uris[i]);
        } else if (kind == "segments") {
            add_elements(corpus::segment_from_json(j).elements);
        } else {
            add_elements(corpus::document_from_json(j).elements);
        }
    });
    return images;
}

} // namespace

void add_dedup(CLI::App& app, Context& ctx) {
    auto* dedup = app.add_subcommand("dedup", "Find evaluation images that duplicate training images");
    dedup->require_subcommand(1);
    auto flags = std::make_shared<DedupFlags>();

    auto* embed = dedup->add_subcommand("embed", "Embed every image named by a dataset, document or segment file");
    embed->add_option("--input,-i", flags->input, "JSONL listing images")->required()->check(CLI::ExistingFile);
    embed->add_option("--out,-o", flags->out, "Output embeddings.bin (JSON sidecar written alongside)")->required();
    embed->add_option("--from", flags->from, "Record kind of the input")
        ->check(CLI::IsMember({"auto", "dataset", "documents", "segments"}))
        ->capture_default_str();
    embed->add_option("--format", flags->format, "Dataset format when the input is a dataset")
        ->check(CLI::IsMember({"vqa_jsonl", "usmle_jsonl"}))
        ->capture_default_str();
    embed->add_option("--embedder-url", flags->embedder,
                      "Image embedder: http(s) URL or a line-JSON command; default built-in pixel downsampler");
    embed->add_option("--image-root", flags->image_root,
                      "Directory relative image URIs are resolved against; default the input's directory")
        ->check(CLI::ExistingDirectory);
    embed->add_option("--grid", flags->grid, "Grid size of the built-in embedder")->check(CLI::PositiveNumber)->capture_default_str();
    embed->add_option("--batch", flags->batch, "Images per embedder call")->check(CLI::PositiveNumber)->capture_default_str();
    embed->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        const auto images = collect_images(*flags);
        std::unique_ptr<dedup::ImageEmbedderClient> client;
        if (flags->embedder.empty()) client = std::make_unique<dedup::PixelEmbedder>(flags->grid);
        else client = std::make_unique<dedup::RemoteImageEmbedder>(make_transport(flags->embedder));
        dedup::EmbedOptions options;
        options.batch_size = flags->batch;
        options.parallelism = ctx.globals.jobs;
        const auto outcome = dedup::embed_images(images, *client, options);
        dedup::write_embeddings(flags->out, {outcome.vectors, outcome.pooling});
        json errors = json::array();
        for (const auto& e : outcome.errors) {
            spdlog::warn("failed to embed {}: {}", e.image_id, e.message);
            errors.push_back({{"image_id", e.image_id}, {"error", e.message}});
        }
        manifest.note("errors", errors);
        manifest.write_next_to(flags->out);
        emit({{"images", images.size()}, {"embedded", outcome.vectors.size()}, {"failed", outcome.errors.size()}});
        if (outcome.vectors.empty() && !images.empty())
            throw Error(ErrorKind::Validation, "no image could be embedded");
    });

    auto* knn = dedup->add_subcommand("knn", "Exact k nearest training images for every evaluation image");
    knn->add_option("--eval", flags->eval, "Evaluation embeddings.bin")->required()->check(CLI::ExistingFile);
    knn->add_option("--train", flags->train, "Training embeddings.bin")->required()->check(CLI::ExistingFile);
    knn->add_option("--out,-o", flags->out, "Ranked pairs JSONL (ascending distance)")->required();
    knn->add_option("--k", flags->k, "Neighbours per evaluation image")->check(CLI::PositiveNumber)->capture_default_str();
    knn->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->eval);
        manifest.input(flags->train);
        const auto eval = dedup::read_embeddings(flags->eval);
        const auto train = dedup::read_embeddings(flags->train);
        const auto pairs = dedup::knn_pairs(eval.vectors, train.vectors, flags->k, ctx.globals.jobs);
        std::vector<json> out;
        out.reserve(pairs.size());
        for (const auto& p : pairs) out.push_back(dedup::to_json(p));
        io::write_jsonl_atomic(flags->out, out);
        manifest.note("total_eval", eval.vectors.size());
        manifest.write_next_to(flags->out);
        emit({{"pairs", pairs.size()}, {"eval", eval.vectors.size()}, {"train", train.vectors.size()}});
    });

    auto* flag = dedup->add_subcommand("flag", "Flag evaluation images closer than a threshold to any training image");
    flag->add_option("--pairs", flags->pairs, "Pairs JSONL from dedup knn")->required()->check(CLI::ExistingFile);
    flag->add_option("--out,-o", flags->out, "Leakage report JSON")->required();
    flag->add_option("--threshold", flags->threshold, "Distance below which a pair is a duplicate")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    auto* total = flag->add_option("--total-eval", flags->total_eval, "Number of evaluation images");
    flag->add_option("--eval", flags->eval, "Evaluation embeddings.bin, to count evaluation images")
        ->check(CLI::ExistingFile)
        ->excludes(total);
    flag->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->pairs);
        std::vector<dedup::DistancePair> pairs;
        io::for_each_jsonl(flags->pairs, [&](std::size_t, const json& j) { pairs.push_back(dedup::pair_from_json(j)); });
        std::size_t total_eval = flags->total_eval;
        if (!flags->eval.empty()) {
            manifest.input(flags->eval);
            total_eval = dedup::read_embeddings(flags->eval).vectors.size();
        }
        if (total_eval == 0) {
            std::set<std::string> ids;
            for (const auto& p : pairs) ids.insert(p.eval_image_id);
            total_eval = ids.size();
        }
        const auto report = dedup::apply_threshold(pairs, flags->threshold, total_eval);
        io::write_json_atomic(flags->out, dedup::to_json(report));
        manifest.write_next_to(flags->out);
        emit({{"flagged", report.flagged.size()},
              {"total_eval", report.total_eval},
              {"survivors", report.total_eval - report.flagged.size()}});
    });

    auto* filter = dedup->add_subcommand("filter", "Remove items whose images were flagged");
    filter->add_option("--dataset", flags->input, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    filter->add_option("--format", flags->format, "Dataset format")
        ->check(CLI::IsMember({"vqa_jsonl", "usmle_jsonl"}))
        ->capture_default_str();
    filter->add_option("--report", flags->report, "Leakage report from dedup flag")->required()->check(CLI::ExistingFile);
    filter->add_option("--out,-o", flags->out, "Filtered dataset JSONL")->required();
    filter->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        manifest.input(flags->report);
        const auto items = bench::load_dataset(flags->input, bench::format_from_string(flags->format));
        const auto report = dedup::report_from_json(io::read_json(flags->report));
        const auto kept = dedup::filter_eval_set(items, report);
        bench::save_dataset(flags->out, kept);
        manifest.write_next_to(flags->out);
        emit({{"items", items.size()}, {"kept", kept.size()}, {"removed", items.size() - kept.size()}});
    });

    auto* cluster = dedup->add_subcommand("cluster", "Seeded k-means over embeddings");
    cluster->add_option("--input,-i", flags->input, "embeddings.bin")->required()->check(CLI::ExistingFile);
    cluster->add_option("--out,-o", flags->out, "Cluster assignment JSON")->required();
    cluster->add_option("--clusters", flags->clusters, "Number of clusters")->check(CLI::PositiveNumber)->capture_default_str();
    cluster->add_option("--seed", flags->seed, "Seeding RNG seed")->capture_default_str();
    cluster->add_option("--max-iters", flags->max_iters, "Iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
    cluster->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        manifest.seed("cluster", flags->seed);
        const auto file = dedup::read_embeddings(flags->input);
        const auto result = dedup::cluster_embeddings(file.vectors, flags->clusters, flags->seed, flags->max_iters);
        json members = json::array();
        std::vector<std::size_t> sizes(result.centroids.size(), 0);
        for (std::size_t i = 0; i < file.vectors.size(); ++i) {
            members.push_back({{"image_id", file.vectors[i].image_id}, {"cluster", result.assignment[i]}});
            ++sizes[result.assignment[i]];
        }
        const json out = {{"k", result.centroids.size()},
                          {"seed", flags->seed},
                          {"iterations", result.iterations},
                          {"converged", result.converged},
                          {"objective_history", result.objective_history},
                          {"sizes", sizes},
                          {"assignment", std::move(members)},
                          {"centroids", result.centroids}};
        io::write_json_atomic(flags->out, out, -1);
        manifest.write_next_to(flags->out);
        emit({{"k", result.centroids.size()},
              {"iterations", result.iterations},
              {"converged", result.converged},
              {"objective", result.objective_history.empty() ? 0.0 : result.objective_history.back()}});
    });
}

} // namespace mmkit::cli
