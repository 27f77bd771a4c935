// SPDX-License-Identifier: Apache-2.0
#include <optional>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmkit/bench/prompt.hpp"
#include "mmkit/bench/runner.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/parallel.hpp"
#include "mmkit/corpus/pipeline.hpp"

namespace mmkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct BenchFlags {
    fs::path dataset;
    fs::path train;
    fs::path test;
    fs::path shots;
    fs::path out;
    fs::path out_dir;
    fs::path prompts;
    fs::path gold;
    std::optional<fs::path> template_path;
    std::string format = "vqa_jsonl";
    double image_fraction = 0.9;
    double question_fraction = 0.9;
    std::uint64_t seed = 0;
    std::optional<std::size_t> n_shots;
    std::size_t budget = corpus::kDefaultMaxTokens;
    bool per_item = false;
    std::string runner;
    std::string runner_url;
    std::string fixed_text;
    std::string model_id;
    std::optional<std::string> mode;
    std::size_t max_new_tokens = 128;
};

std::vector<bench::VqaItem> load(const fs::path& path, const std::string& format) {
    return bench::load_dataset(path, bench::format_from_string(format));
}

std::size_t shot_count(const BenchFlags& f) {
    return f.n_shots.value_or(bench::default_shot_count(bench::format_from_string(f.format)));
}

void add_format(CLI::App* cmd, BenchFlags& f) {
    cmd->add_option("--format", f.format, "Dataset format")
        ->check(CLI::IsMember({"vqa_jsonl", "usmle_jsonl"}))
        ->capture_default_str();
}

void write_prompts(const fs::path& path, const std::vector<bench::FewShotPrompt>& prompts) {
    std::vector<json> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(bench::to_json(p));
    io::write_jsonl_atomic(path, out);
}

} // namespace

void add_bench(CLI::App& app, Context& ctx) {
    auto* bench_cmd = app.add_subcommand("bench", "Few-shot generative VQA evaluation");
    bench_cmd->require_subcommand(1);
    auto flags = std::make_shared<BenchFlags>();

    auto* split = bench_cmd->add_subcommand("split", "Image- and question-disjoint train/test split");
    split->add_option("--dataset", flags->dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    add_format(split, *flags);
    split->add_option("--out-dir", flags->out_dir, "Directory for train.jsonl, test.jsonl, discarded.jsonl")->required();
    split->add_option("--image-fraction", flags->image_fraction, "Share of images assigned to train")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    split->add_option("--question-fraction", flags->question_fraction, "Share of questions assigned to train")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    split->add_option("--seed", flags->seed, "Split seed")->capture_default_str();
    split->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->dataset);
        manifest.seed("split", flags->seed);
        const auto items = load(flags->dataset, flags->format);
        const auto result = bench::make_disjoint_split(
            items, {flags->image_fraction, flags->question_fraction, flags->seed});
        fs::create_directories(flags->out_dir);
        bench::save_dataset(flags->out_dir / "train.jsonl", result.train);
        bench::save_dataset(flags->out_dir / "test.jsonl", result.test);
        bench::save_dataset(flags->out_dir / "discarded.jsonl", result.discarded);
        manifest.write_into(flags->out_dir);
        emit({{"train", result.train.size()}, {"test", result.test.size()}, {"discarded", result.discarded.size()}});
    });

    auto* shots = bench_cmd->add_subcommand("shots", "Seeded fixed shot sample from the train split");
    shots->add_option("--train", flags->train, "Train split JSONL")->required()->check(CLI::ExistingFile);
    add_format(shots, *flags);
    shots->add_option("--n-shots", flags->n_shots, "Shots to draw; default 6, or 4 for usmle_jsonl");
    shots->add_option("--seed", flags->seed, "Sampling seed")->capture_default_str();
    shots->add_option("--out,-o", flags->out, "Output shots JSONL")->required();
    shots->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->train);
        manifest.seed("shots", flags->seed);
        const auto chosen = bench::select_shots(load(flags->train, flags->format), shot_count(*flags), flags->seed);
        bench::save_dataset(flags->out, chosen);
        manifest.write_next_to(flags->out);
        json ids = json::array();
        for (const auto& s : chosen) ids.push_back(s.item_id);
        emit({{"shots", ids}});
    });

    auto* prompt = bench_cmd->add_subcommand("prompt", "Assemble one interleaved prompt per test item");
    prompt->add_option("--test", flags->test, "Test split JSONL")->required()->check(CLI::ExistingFile);
    auto* train_opt = prompt->add_option("--train", flags->train, "Train split JSONL to draw shots from")->check(CLI::ExistingFile);
    prompt->add_option("--shots", flags->shots, "Fixed shots JSONL (from bench shots)")
        ->check(CLI::ExistingFile)
        ->excludes(train_opt);
    add_format(prompt, *flags);
    prompt->add_option("--n-shots", flags->n_shots, "Shots per prompt; 0 for zero-shot; default 6, or 4 for usmle_jsonl");
    prompt->add_option("--seed", flags->seed, "Shot sampling seed")->capture_default_str();
    prompt->add_option("--budget", flags->budget, "Token budget per prompt")->check(CLI::PositiveNumber)->capture_default_str();
    prompt->add_option("--template", flags->template_path, "Prompt template JSON")->check(CLI::ExistingFile);
    prompt->add_flag("--per-item-shots", flags->per_item, "Resample shots for every test item");
    prompt->add_option("--out,-o", flags->out, "Output prompts JSONL")->required();
    prompt->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->test);
        manifest.seed("shots", flags->seed);
        const auto test = load(flags->test, flags->format);
        const std::size_t n = shot_count(*flags);
        std::vector<bench::VqaItem> pool;
        if (!flags->shots.empty()) {
            manifest.input(flags->shots);
            pool = load(flags->shots, flags->format);
            if (flags->per_item) throw Error(ErrorKind::InvalidArgument, "--per-item-shots needs --train, not --shots");
        } else if (!flags->train.empty()) {
            manifest.input(flags->train);
            pool = load(flags->train, flags->format);
        } else if (n > 0) {
            throw Error(ErrorKind::InvalidArgument, "few-shot prompts need --train or --shots (or --n-shots 0)");
        }
        bench::PromptTemplate tmpl;
        if (flags->template_path) {
            manifest.input(*flags->template_path);
            tmpl = bench::PromptTemplate::from_json(io::read_json(*flags->template_path));
        }
        std::vector<bench::VqaItem> fixed;
        if (n > 0 && !flags->per_item) {
            if (!flags->shots.empty()) {
                if (pool.size() < n)
                    throw Error(ErrorKind::InvalidArgument, "shots file holds " + std::to_string(pool.size()) +
                                                                " items, " + std::to_string(n) + " requested");
                fixed.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
            } else {
                fixed = bench::select_shots(pool, n, flags->seed);
            }
        }
        const WhitespaceTokenizer tokenizer;
        std::vector<bench::FewShotPrompt> prompts(test.size());
        parallel_for(test.size(), ctx.globals.jobs, [&](std::size_t i) {
            const auto shots_for = n == 0             ? std::vector<bench::VqaItem>{}
                                   : flags->per_item ? bench::select_shots_for(pool, n, flags->seed, test[i].item_id)
                                                     : fixed;
            prompts[i] = bench::assemble_prompt(test[i], shots_for, tmpl, flags->budget, tokenizer);
        });
        write_prompts(flags->out, prompts);
        std::size_t truncated = 0;
        for (const auto& p : prompts) truncated += p.shot_item_ids.size() < n;
        manifest.note("shots_requested", n);
        manifest.note("prompts_truncated", truncated);
        manifest.write_next_to(flags->out);
        emit({{"prompts", prompts.size()}, {"n_shots", n}, {"truncated", truncated}});
    });

    auto* generate = bench_cmd->add_subcommand("generate", "Run a model over prompts; resumable");
    generate->add_option("--prompts", flags->prompts, "Prompts JSONL")->required()->check(CLI::ExistingFile);
    generate->add_option("--out,-o", flags->out, "Generations JSONL (appended while running, resumed on restart)")->required();
    generate->add_option("--model-id", flags->model_id, "Identifier recorded with each generation")->required();
    generate->add_option("--mode", flags->mode, "zero_shot, few_shot or fine_tuned; default from the prompts")
        ->check(CLI::IsMember({"zero_shot", "few_shot", "fine_tuned"}));
    auto* url = generate->add_option("--runner-url", flags->runner_url,
                                     "Model runner: http(s) URL or a command speaking line-JSON on stdio");
    generate->add_option("--runner", flags->runner, "Built-in runner instead of --runner-url")
        ->check(CLI::IsMember({"echo", "fixed"}))
        ->excludes(url);
    generate->add_option("--gold", flags->gold, "Dataset answering for the echo runner")->check(CLI::ExistingFile);
    add_format(generate, *flags);
    generate->add_option("--fixed-text", flags->fixed_text, "Answer returned by the fixed runner");
    generate->add_option("--max-new-tokens", flags->max_new_tokens, "Decode length cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    generate->callback([flags, &ctx] {
        auto manifest = ctx.manifest();
        manifest.input(flags->prompts);
        std::vector<bench::FewShotPrompt> prompts;
        io::for_each_jsonl(flags->prompts, [&](std::size_t, const json& j) { prompts.push_back(bench::prompt_from_json(j)); });

        std::unique_ptr<bench::ModelRunnerClient> runner;
        if (flags->runner == "echo") {
            if (flags->gold.empty()) throw Error(ErrorKind::InvalidArgument, "the echo runner needs --gold");
            manifest.input(flags->gold);
            runner = std::make_unique<bench::EchoRunner>(load(flags->gold, flags->format));
        } else if (flags->runner == "fixed") {
            runner = std::make_unique<bench::FixedRunner>(flags->fixed_text);
        } else if (!flags->runner_url.empty()) {
            runner = std::make_unique<bench::RemoteRunner>(make_transport(flags->runner_url));
        } else {
            throw Error(ErrorKind::InvalidArgument, "give --runner-url or --runner");
        }
        bench::DecodeConfig decode;
        decode.max_new_tokens = flags->max_new_tokens;
        decode.parallelism = ctx.globals.jobs;
        bench::RunIdentity identity{flags->model_id, std::nullopt};
        if (flags->mode) identity.mode = bench::mode_from_string(*flags->mode);
        const auto generations = bench::run_generation(prompts, *runner, decode, identity, flags->out);
        std::size_t failed = 0;
        for (const auto& g : generations) failed += g.failed;
        manifest.note("failed", failed);
        manifest.write_next_to(flags->out);
        emit({{"generations", generations.size()}, {"failed", failed}});
    });
}

} // namespace mmkit::cli
