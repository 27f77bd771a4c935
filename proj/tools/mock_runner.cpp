// SPDX-License-Identifier: Apache-2.0
// Stand-in model runner for tests and smoke runs. Speaks the runner
// protocol as line-JSON on stdio, or over HTTP with --port.
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "mmkit/bench/runner.hpp"
#include "mmkit/common/error.hpp"

namespace {

nlohmann::json answer(mmkit::bench::ModelRunnerClient& runner, const nlohmann::json& request) {
    try {
        const auto reply = runner.generate(request);
        return {{"text", reply.text}, {"meta", reply.meta}};
    } catch (const std::exception& e) {
        return {{"error", e.what()}};
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mock model runner", "mock_runner"};
    std::string mode = "echo";
    std::string gold;
    std::string format = "vqa_jsonl";
    std::string text = "unknown";
    int port = -1;
    app.add_option("--mode", mode, "echo returns the gold answer, fixed a constant")
        ->check(CLI::IsMember({"echo", "fixed"}))
        ->capture_default_str();
    app.add_option("--gold", gold, "Dataset JSONL for echo mode")->check(CLI::ExistingFile);
    app.add_option("--format", format, "Gold dataset format")->capture_default_str();
    app.add_option("--text", text, "Answer for fixed mode")->capture_default_str();
    app.add_option("--port", port, "Serve POST /generate on this port instead of stdio (0 picks one)");
    CLI11_PARSE(app, argc, argv);

    std::unique_ptr<mmkit::bench::ModelRunnerClient> runner;
    try {
        if (mode == "echo") {
            if (gold.empty()) {
                std::cerr << "mock_runner: echo mode needs --gold\n";
                return 2;
            }
            runner = std::make_unique<mmkit::bench::EchoRunner>(
                mmkit::bench::load_dataset(gold, mmkit::bench::format_from_string(format)));
        } else {
            runner = std::make_unique<mmkit::bench::FixedRunner>(text);
        }
    } catch (const mmkit::Error& e) {
        std::cerr << "mock_runner: " << e.what() << "\n";
        return 1;
    }

    if (port >= 0) {
        httplib::Server server;
        server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json request;
            try {
                request = nlohmann::json::parse(req.body);
            } catch (const std::exception&) {
                res.status = 400;
                res.set_content(R"({"error":"malformed request"})", "application/json");
                return;
            }
            res.set_content(answer(*runner, request).dump(), "application/json");
        });
        const int bound = port == 0 ? server.bind_to_any_port("127.0.0.1") : (server.bind_to_port("127.0.0.1", port) ? port : -1);
        if (bound < 0) {
            std::cerr << "mock_runner: cannot bind\n";
            return 1;
        }
        std::cout << bound << std::endl;
        server.listen_after_bind();
        return 0;
    }

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        nlohmann::json reply;
        try {
            reply = answer(*runner, nlohmann::json::parse(line));
        } catch (const std::exception&) {
            reply = {{"error", "malformed request"}};
        }
        std::cout << reply.dump() << std::endl;
    }
    return 0;
}
