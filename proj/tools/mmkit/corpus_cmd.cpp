// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <mutex>
#include <optional>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/parallel.hpp"
#include "mmkit/common/text.hpp"
#include "mmkit/corpus/pipeline.hpp"

namespace mmkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<corpus::InterleavedDocument> load_documents(const fs::path& path) {
    std::vector<corpus::InterleavedDocument> docs;
    io::for_each_jsonl(path, [&](std::size_t line, const json& j) {
        try {
            docs.push_back(corpus::document_from_json(j));
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return docs;
}

void save_documents(const fs::path& path, const std::vector<corpus::InterleavedDocument>& docs) {
    std::vector<json> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(corpus::to_json(d));
    io::write_jsonl_atomic(path, out);
}

std::vector<fs::path> html_inputs(const fs::path& input) {
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input)) {
            const auto ext = e.path().extension();
            if (e.is_regular_file() && (ext == ".html" || ext == ".htm" || ext == ".xhtml")) files.push_back(e.path());
        }
    } else if (fs::is_regular_file(input)) {
        files.push_back(input);
    } else {
        throw Error(ErrorKind::Io, "no such input " + input.string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct CorpusFlags {
    fs::path input;
    fs::path out;
    std::size_t max_tokens = corpus::kDefaultMaxTokens;
    std::size_t max_images = corpus::kDefaultMaxImages;
    double train_fraction = corpus::kDefaultTrainFraction;
    std::uint64_t seed = 0;
    std::size_t min_chars = 0;
    std::optional<fs::path> blocklist;
    std::string source_kind = "book";
    bool strict = false;
    std::string classifier;
};

} // namespace

void add_corpus(CLI::App& app, Context& ctx) {
    auto* corpus = app.add_subcommand("corpus", "Build interleaved training data from HTML documents");
    corpus->require_subcommand(1);
    auto flags = std::make_shared<CorpusFlags>();

    auto* parse = corpus->add_subcommand("parse", "HTML files -> documents JSONL");
    parse->add_option("--input,-i", flags->input, "HTML file or directory of .html files")->required();
    parse->add_option("--out,-o", flags->out, "Output documents JSONL")->required();
    parse->add_option("--source-kind", flags->source_kind, "book or paired")
        ->check(CLI::IsMember({"book", "paired"}))
        ->capture_default_str();
    parse->add_flag("--strict", flags->strict, "Fail on the first undecodable document instead of skipping it");
    parse->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        const auto files = html_inputs(flags->input);
        std::vector<std::optional<corpus::InterleavedDocument>> parsed(files.size());
        std::vector<std::string> failures(files.size());
        parallel_for(files.size(), ctx.globals.jobs, [&](std::size_t i) {
            try {
                auto doc = corpus::parse_document(io::read_file(files[i]), files[i].stem().string());
                doc.source_kind = flags->source_kind == "book" ? corpus::SourceKind::Book : corpus::SourceKind::Paired;
                parsed[i] = std::move(doc);
            } catch (const Error& e) {
                if (flags->strict) throw Error(e.kind(), files[i].string() + ": " + e.what());
                failures[i] = std::string(to_string(e.kind())) + ": " + e.what();
            }
        });
        std::vector<corpus::InterleavedDocument> docs;
        json skipped = json::array();
        for (std::size_t i = 0; i < files.size(); ++i) {
            manifest.input(files[i]);
            if (parsed[i]) docs.push_back(std::move(*parsed[i]));
            else {
                spdlog::warn("skipping {}: {}", files[i].string(), failures[i]);
                skipped.push_back({{"file", files[i].string()}, {"error", failures[i]}});
            }
        }
        std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
        for (std::size_t i = 1; i < docs.size(); ++i)
            if (docs[i].doc_id == docs[i - 1].doc_id)
                throw Error(ErrorKind::DuplicateId, "two inputs share doc_id '" + docs[i].doc_id + "'");
        save_documents(flags->out, docs);
        manifest.note("skipped", skipped);
        manifest.write_next_to(flags->out);
        emit({{"documents", docs.size()}, {"skipped", skipped.size()}, {"out", flags->out.string()}});
    });

    auto* clean = corpus->add_subcommand("clean", "Drop duplicate, short and blocklisted paragraphs");
    clean->add_option("--input,-i", flags->input, "Documents JSONL")->required()->check(CLI::ExistingFile);
    clean->add_option("--out,-o", flags->out, "Output documents JSONL")->required();
    clean->add_option("--min-chars", flags->min_chars, "Minimum paragraph length in characters")->capture_default_str();
    clean->add_option("--blocklist", flags->blocklist, "File with one regular expression per line")
        ->check(CLI::ExistingFile);
    clean->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        corpus::CleanConfig cfg;
        cfg.min_chars = flags->min_chars;
        if (flags->blocklist) {
            manifest.input(*flags->blocklist);
            for (auto& line : text::split_lines(io::read_file(*flags->blocklist))) {
                const std::string pattern(text::trim(line));
                if (!pattern.empty() && pattern[0] != '#') cfg.blocklist.push_back(pattern);
            }
        }
        const auto docs = load_documents(flags->input);
        std::vector<std::optional<corpus::InterleavedDocument>> cleaned(docs.size());
        std::vector<corpus::CleanStats> stats(docs.size());
        parallel_for(docs.size(), ctx.globals.jobs, [&](std::size_t i) {
            try {
                cleaned[i] = corpus::clean_document(docs[i], cfg, &stats[i]);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::EmptyDocument) throw;
                stats[i].empty_result = true;
            }
        });
        std::vector<corpus::InterleavedDocument> out;
        std::size_t dup = 0, short_ = 0, blocked = 0, emptied = 0;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            dup += stats[i].duplicates_removed;
            short_ += stats[i].short_removed;
            blocked += stats[i].blocked_removed;
            if (cleaned[i] && !stats[i].empty_result) out.push_back(std::move(*cleaned[i]));
            else ++emptied;
        }
        save_documents(flags->out, out);
        const json summary = {{"documents", out.size()},
                              {"emptied", emptied},
                              {"duplicates_removed", dup},
                              {"short_removed", short_},
                              {"blocked_removed", blocked}};
        manifest.note("stats", summary);
        manifest.write_next_to(flags->out);
        emit(summary);
    });

    auto* segment = corpus->add_subcommand("segment", "Cut documents into bounded training segments");
    segment->add_option("--input,-i", flags->input, "Documents JSONL")->required()->check(CLI::ExistingFile);
    segment->add_option("--out,-o", flags->out, "Output segments JSONL")->required();
    segment->add_option("--max-tokens", flags->max_tokens, "Token budget per segment")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    segment->add_option("--max-images", flags->max_images, "Image budget per segment")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    segment->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        const auto docs = load_documents(flags->input);
        const WhitespaceTokenizer tokenizer;
        std::vector<std::vector<corpus::Segment>> per_doc(docs.size());
        parallel_for(docs.size(), ctx.globals.jobs, [&](std::size_t i) {
            per_doc[i] = corpus::segment_document(docs[i], tokenizer, flags->max_tokens, flags->max_images);
        });
        std::vector<std::size_t> order(docs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return docs[a].doc_id < docs[b].doc_id; });
        std::vector<json> out;
        for (std::size_t i : order)
            for (const auto& s : per_doc[i]) out.push_back(corpus::to_json(s));
        io::write_jsonl_atomic(flags->out, out);
        manifest.write_next_to(flags->out);
        emit({{"documents", docs.size()}, {"segments", out.size()}});
    });

    auto* split = corpus->add_subcommand("split", "Document-atomic train/validation split of segments");
    split->add_option("--input,-i", flags->input, "Segments JSONL")->required()->check(CLI::ExistingFile);
    split->add_option("--out,-o", flags->out, "Output split JSON")->required();
    split->add_option("--train-fraction", flags->train_fraction, "Target share of segments in train")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    split->add_option("--seed", flags->seed, "Split seed")->capture_default_str();
    split->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        manifest.seed("split", flags->seed);
        std::vector<corpus::Segment> segments;
        io::for_each_jsonl(flags->input, [&](std::size_t, const json& j) { segments.push_back(corpus::segment_from_json(j)); });
        const auto result = corpus::split_corpus(segments, flags->train_fraction, flags->seed);
        io::write_json_atomic(flags->out, corpus::to_json(result));
        manifest.write_next_to(flags->out);
        emit({{"train", result.train.size()}, {"validation", result.validation.size()}});
    });

    auto* classify = corpus->add_subcommand("classify", "Assign a subject category to each title");
    classify->add_option("--input,-i", flags->input, "Documents JSONL (titles taken from records) or text file, one title per line")
        ->required()
        ->check(CLI::ExistingFile);
    classify->add_option("--out,-o", flags->out, "Output CSV (title,category)")->required();
    classify->add_option("--classifier-url", flags->classifier,
                         "Classifier endpoint: http(s) URL or a command speaking line-JSON; default keyword rules");
    classify->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->input);
        std::vector<std::string> titles;
        if (flags->input.extension() == ".jsonl") {
            for (const auto& d : load_documents(flags->input)) titles.push_back(d.title.value_or(""));
        } else {
            for (auto& line : text::split_lines(io::read_file(flags->input)))
                if (!text::trim(line).empty()) titles.emplace_back(text::trim(line));
        }
        std::unique_ptr<corpus::TextClassifierClient> client;
        if (flags->classifier.empty()) client = std::make_unique<corpus::KeywordClassifier>();
        else client = std::make_unique<corpus::RemoteClassifier>(make_transport(flags->classifier));
        std::size_t coerced = 0;
        const auto result = corpus::classify_titles(titles, *client, &coerced);
        std::string csv = "title,category\n";
        for (const auto& r : result) {
            std::string t = r.title;
            if (t.find_first_of(",\"\n") != std::string::npos) {
                std::string q = "\"";
                for (char c : t) {
                    if (c == '"') q.push_back('"');
                    q.push_back(c);
                }
                t = q + "\"";
            }
            csv += t + "," + r.category + "\n";
        }
        io::write_file_atomic(flags->out, csv);
        manifest.note("coerced_to_other", coerced);
        manifest.write_next_to(flags->out);
        emit({{"titles", result.size()}, {"coerced_to_other", coerced}});
    });
}

} // namespace mmkit::cli
