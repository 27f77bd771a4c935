// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmkit/common/error.hpp"

namespace {

int report(bool as_json, std::string_view kind, const std::string& message, int code) {
    if (as_json) {
        const nlohmann::json e = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
        std::cerr << e.dump() << "\n";
    } else {
        std::cerr << "mmkit: " << kind << ": " << message << "\n";
    }
    return code;
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("mmkit");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);

    mmkit::cli::Globals globals;
    std::vector<std::string> args(argv, argv + argc);
    for (const auto& a : args)
        if (a == "--json") globals.json_errors = true;

    CLI::App app{"Toolkit for interleaved medical image-text corpora and generative VQA evaluation.", "mmkit"};
    app.set_version_flag("--version", MMKIT_VERSION);
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    app.add_flag("--json", globals.json_errors, "Print errors as single-line JSON");
    app.add_option("--jobs", globals.jobs, "Upper bound on worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--log-level", globals.log_level, "trace, debug, info, warn, error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
        ->capture_default_str();
    app.require_subcommand(1);
    app.parse_complete_callback([&] { spdlog::set_level(spdlog::level::from_str(globals.log_level)); });

    mmkit::cli::Context ctx{app, globals, args};
    mmkit::cli::add_corpus(app, ctx);
    mmkit::cli::add_dedup(app, ctx);
    mmkit::cli::add_bench(app, ctx);
    mmkit::cli::add_metrics(app, ctx);
    mmkit::cli::add_serve(app, ctx);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
        if (globals.json_errors) return report(true, "usage", e.what(), 2);
        app.exit(e);
        return 2;
    } catch (const mmkit::Error& e) {
        return report(globals.json_errors, mmkit::to_string(e.kind()), e.what(), 1);
    } catch (const std::exception& e) {
        return report(globals.json_errors, "internal", e.what(), 1);
    }
    return 0;
}
