// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <iostream>

#include "cli.hpp"
#include "mmkit/common/clock.hpp"
#include "mmkit/common/hash.hpp"
#include "mmkit/common/jsonl.hpp"

namespace mmkit::cli {

namespace fs = std::filesystem;

void emit(const nlohmann::json& value) { std::cout << value.dump() << "\n"; }

RunManifest::RunManifest(const CLI::App& root, std::vector<std::string> argv)
    : root_(root), argv_(std::move(argv)), started_at_(iso_utc_now()) {}

void RunManifest::input(const fs::path& path) {
    if (fs::is_regular_file(path)) {
        inputs_[path.string()] = hash::sha256_hex(io::read_file(path));
    } else if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(path))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) inputs_[f.string()] = hash::sha256_hex(io::read_file(f));
    }
}

void RunManifest::seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

void RunManifest::note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

void RunManifest::write(const fs::path& path) {
    const nlohmann::json m = {{"command_line", argv_},
                              {"config", root_.config_to_str(true, false)},
                              {"inputs", inputs_},
                              {"seeds", seeds_},
                              {"notes", notes_},
                              {"tool_version", MMKIT_VERSION},
                              {"started_at", started_at_},
                              {"ended_at", iso_utc_now()}};
    io::write_json_atomic(path, m);
}

void RunManifest::write_next_to(const fs::path& output) { write(fs::path(output.string() + ".manifest.json")); }

void RunManifest::write_into(const fs::path& directory) { write(directory / "manifest.json"); }

} // namespace mmkit::cli
