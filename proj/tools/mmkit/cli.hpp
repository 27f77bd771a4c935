// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace mmkit::cli {

struct Globals {
    bool json_errors = false;
    std::size_t jobs = 1;
    std::string log_level = "warn";
};

/// Records how an artifact was produced: command line, resolved options,
/// input digests, seeds, tool version and timing. Written as
/// `<primary output>.manifest.json`, or `manifest.json` inside an output
/// directory.
class RunManifest {
  public:
    RunManifest(const CLI::App& root, std::vector<std::string> argv);
    void input(const std::filesystem::path& path);
    void seed(const std::string& name, std::uint64_t value);
    void note(const std::string& key, nlohmann::json value);
    void write_next_to(const std::filesystem::path& output);
    void write_into(const std::filesystem::path& directory);

  private:
    void write(const std::filesystem::path& path);
    const CLI::App& root_;
    std::vector<std::string> argv_;
    std::map<std::string, std::string> inputs_;
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json notes_ = nlohmann::json::object();
    std::string started_at_;
};

struct Context {
    CLI::App& root;
    Globals& globals;
    std::vector<std::string> argv;
    RunManifest manifest() const { return RunManifest(root, argv); }
};

using Action = std::function<void()>;

// Each registers its subcommands; the callback runs after parsing.
void add_corpus(CLI::App& app, Context& ctx);
void add_dedup(CLI::App& app, Context& ctx);
void add_bench(CLI::App& app, Context& ctx);
void add_metrics(CLI::App& app, Context& ctx);
void add_serve(CLI::App& app, Context& ctx);

/// Prints a JSON value to stdout on one line.
void emit(const nlohmann::json& value);

} // namespace mmkit::cli
