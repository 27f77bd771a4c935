// SPDX-License-Identifier: Apache-2.0
#include <pthread.h>

#include <csignal>
#include <thread>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmkit/rating/service.hpp"

namespace mmkit::cli {

namespace fs = std::filesystem;

namespace {

struct ServeFlags {
    int port = 8080;
    std::string host = "127.0.0.1";
    fs::path data_dir;
    fs::path raters_file;
    std::uint64_t order_seed = 0;
    std::optional<fs::path> static_dir;
    bool no_fsync = false;
    std::size_t snapshot_every = 100;
    std::size_t session_ttl_hours = 12;
};

} // namespace

void add_serve(CLI::App& app, Context& ctx) {
    auto flags = std::make_shared<ServeFlags>();
    auto* serve = app.add_subcommand("serve", "Run the blinded rating service");
    serve->add_option("--port", flags->port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535))->capture_default_str();
    serve->add_option("--host", flags->host, "Listen address")->capture_default_str();
    serve->add_option("--data-dir", flags->data_dir, "Directory with items.jsonl, generations.jsonl, images/")
        ->required()
        ->check(CLI::ExistingDirectory);
    serve->add_option("--raters-file", flags->raters_file, "JSON with rater ids, tokens and the admin token")
        ->required()
        ->check(CLI::ExistingFile);
    serve->add_option("--order-seed", flags->order_seed, "Seed of the per-rater candidate order")->capture_default_str();
    serve->add_option("--static-dir", flags->static_dir, "Serve a browser client from this directory")
        ->check(CLI::ExistingDirectory);
    serve->add_flag("--no-fsync", flags->no_fsync, "Skip fsync after each submission");
    serve->add_option("--snapshot-every", flags->snapshot_every, "Submissions between state snapshots (0 disables)")
        ->capture_default_str();
    serve->add_option("--session-ttl-hours", flags->session_ttl_hours, "Session lifetime")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    serve->callback([flags, &ctx] {
        rating::ServiceOptions options;
        options.order_seed = flags->order_seed;
        options.fsync_each = !flags->no_fsync;
        options.snapshot_every = flags->snapshot_every;
        options.session_ttl = std::chrono::hours(flags->session_ttl_hours);
        rating::RatingService service(flags->data_dir, rating::load_raters(flags->raters_file), options);
        rating::HttpFrontend frontend(service, {flags->host, flags->port, flags->static_dir});
        const int port = frontend.bind();
        emit({{"listening", flags->host + ":" + std::to_string(port)}, {"port", port}});
        std::fflush(stdout);
        // SIGINT/SIGTERM are taken synchronously by a watcher thread so the
        // server is stopped outside signal context.
        sigset_t signals;
        sigemptyset(&signals);
        sigaddset(&signals, SIGINT);
        sigaddset(&signals, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &signals, nullptr);
        std::thread watcher([&] {
            int sig = 0;
            sigwait(&signals, &sig);
            if (sig == SIGTERM || sig == SIGINT) frontend.stop();
        });
        frontend.listen();
        // Wakes the watcher if the server stopped for another reason.
        pthread_kill(watcher.native_handle(), SIGTERM);
        watcher.join();
        if (options.snapshot_every > 0) service.write_snapshot();
        (void)ctx;
    });
}

} // namespace mmkit::cli
