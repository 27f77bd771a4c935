// SPDX-License-Identifier: Apache-2.0
#include "mmkit/bench/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "mmkit/common/clock.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/hash.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/parallel.hpp"

namespace mmkit::bench {

using nlohmann::json;

std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::ZeroShot: return "zero_shot";
    case Mode::FewShot: return "few_shot";
    case Mode::FineTuned: return "fine_tuned";
    }
    return "zero_shot";
}

Mode mode_from_string(std::string_view s) {
    if (s == "zero_shot") return Mode::ZeroShot;
    if (s == "few_shot") return Mode::FewShot;
    if (s == "fine_tuned") return Mode::FineTuned;
    throw Error(ErrorKind::Schema, "unknown mode '" + std::string(s) + "'");
}

std::string generation_ref(const std::string& item_id, const std::string& model_id, Mode mode) {
    std::string key = item_id;
    key.push_back('\x1f');
    key += model_id;
    key.push_back('\x1f');
    key += to_string(mode);
    return "g" + hash::sha256_hex(key).substr(0, 20);
}

json to_json(const Generation& g) {
    return {{"item_id", g.item_id},         {"model_id", g.model_id},         {"mode", to_string(g.mode)},
            {"text", g.text},               {"created_at", g.created_at},     {"runner_meta", g.runner_meta},
            {"status", g.failed ? "failed" : "ok"}};
}

Generation generation_from_json(const json& j) {
    Generation g;
    g.item_id = io::require_string(j, "item_id", "generation");
    g.model_id = io::require_string(j, "model_id", "generation");
    g.mode = mode_from_string(io::require_string(j, "mode", "generation"));
    g.text = io::require_string(j, "text", "generation");
    g.created_at = j.value("created_at", "");
    g.runner_meta = j.value("runner_meta", json::object());
    g.failed = j.value("status", "ok") == "failed";
    return g;
}

std::vector<Generation> load_generations(const std::filesystem::path& path) {
    std::vector<Generation> out;
    std::set<std::tuple<std::string, std::string, Mode>> seen;
    io::for_each_jsonl(path, [&](std::size_t line, const json& r) {
        Generation g = generation_from_json(r);
        if (!seen.emplace(g.item_id, g.model_id, g.mode).second)
            throw Error(ErrorKind::DuplicateId, path.string() + ":" + std::to_string(line) + ": duplicate generation for " +
                                                    g.item_id + "/" + g.model_id + "/" + std::string(to_string(g.mode)));
        out.push_back(std::move(g));
    });
    return out;
}

json make_runner_request(const FewShotPrompt& prompt, const DecodeConfig& decode) {
    json uris = json::array();
    for (const auto& img : prompt.images) uris.push_back(img.uri);
    const json media_json = media::to_json(prompt.media);
    return {{"item_id", prompt.target_item_id},
            {"tokens", media::to_json(prompt.stream)},
            {"media", media_json.at("attends")},
            {"image_uris", std::move(uris)},
            {"max_new_tokens", decode.max_new_tokens},
            {"stop", decode.stop},
            {"prompt", media::render(prompt.stream)}};
}

RemoteRunner::RemoteRunner(std::unique_ptr<JsonTransport> transport, RetryPolicy retry)
    : transport_(std::move(transport)), retry_(retry) {}

RunnerReply RemoteRunner::generate(const json& request) {
    const json reply = call_with_retry(*transport_, "/generate", request, retry_);
    if (reply.contains("error")) throw Error(ErrorKind::Validation, "runner error: " + reply.at("error").dump());
    if (!reply.contains("text") || !reply.at("text").is_string())
        throw Error(ErrorKind::Validation, "runner reply lacks a string 'text'");
    return {reply.at("text").get<std::string>(), reply.value("meta", json::object())};
}

EchoRunner::EchoRunner(const std::vector<VqaItem>& gold) {
    for (const auto& item : gold) answers_[item.item_id] = item.answer;
}

RunnerReply EchoRunner::generate(const json& request) {
    const std::string id = request.value("item_id", "");
    const auto it = answers_.find(id);
    if (it == answers_.end()) throw Error(ErrorKind::Validation, "echo runner has no gold answer for '" + id + "'");
    return {it->second, {{"runner", "echo"}}};
}

namespace {

using Key = std::tuple<std::string, std::string, Mode>;

Key key_of(const Generation& g) { return {g.item_id, g.model_id, g.mode}; }

class ResultLog {
  public:
    explicit ResultLog(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
        if (!path_ || !std::filesystem::exists(*path_)) return;
        io::for_each_jsonl(
            *path_, [&](std::size_t, const json& r) { store(generation_from_json(r)); }, true);
        // Rewrite so a torn trailing line from an interrupted run is gone
        // before anything is appended after it.
        rewrite();
    }

    ~ResultLog() {
        if (file_) std::fclose(file_);
    }

    bool completed(const Key& key) const {
        const auto it = records_.find(key);
        return it != records_.end() && !it->second.failed;
    }

    void append(const Generation& g) {
        std::lock_guard lock(mutex_);
        store(g);
        if (!path_) return;
        if (!file_) {
            if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
            file_ = std::fopen(path_->c_str(), "ab");
            if (!file_) throw Error(ErrorKind::Io, "cannot append to " + path_->string());
        }
        const std::string line = to_json(g).dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0)
            throw Error(ErrorKind::Io, "write to " + path_->string() + " failed");
    }

    std::vector<Generation> sorted() const {
        std::vector<Generation> out;
        out.reserve(records_.size());
        for (const auto& [key, g] : records_) out.push_back(g);
        return out;  // map order is (item_id, model_id, mode)
    }

    void rewrite() {
        if (!path_) return;
        if (file_) {
            std::fclose(file_);
            file_ = nullptr;
        }
        std::vector<json> lines;
        for (const auto& g : sorted()) lines.push_back(to_json(g));
        io::write_jsonl_atomic(*path_, lines);
    }

  private:
    void store(Generation g) { records_[key_of(g)] = std::move(g); }

    std::optional<std::filesystem::path> path_;
    std::map<Key, Generation> records_;
    std::mutex mutex_;
    std::FILE* file_ = nullptr;
};

} // namespace

std::vector<Generation> run_generation(const std::vector<FewShotPrompt>& prompts, ModelRunnerClient& runner,
                                       const DecodeConfig& decode, const RunIdentity& identity,
                                       const std::optional<std::filesystem::path>& results_path) {
    if (identity.model_id.empty()) throw Error(ErrorKind::InvalidArgument, "model_id is required");
    ResultLog log(results_path);

    std::vector<std::size_t> pending;
    std::set<Key> queued;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const Mode mode = identity.mode.value_or(prompts[i].shot_item_ids.empty() ? Mode::ZeroShot : Mode::FewShot);
        Key key{prompts[i].target_item_id, identity.model_id, mode};
        if (!queued.insert(key).second)
            throw Error(ErrorKind::DuplicateId, "two prompts target " + prompts[i].target_item_id + " in the same run");
        if (!log.completed(key)) pending.push_back(i);
    }
    if (pending.size() < prompts.size())
        spdlog::info("resuming: {} of {} items already generated", prompts.size() - pending.size(), prompts.size());

    parallel_for(pending.size(), decode.parallelism, [&](std::size_t n) {
        const FewShotPrompt& prompt = prompts[pending[n]];
        Generation g;
        g.item_id = prompt.target_item_id;
        g.model_id = identity.model_id;
        g.mode = identity.mode.value_or(prompt.shot_item_ids.empty() ? Mode::ZeroShot : Mode::FewShot);
        try {
            RunnerReply reply = runner.generate(make_runner_request(prompt, decode));
            g.text = std::move(reply.text);
            g.runner_meta = std::move(reply.meta);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Transport)
                throw Error(ErrorKind::Transport, std::string(e.what()) + " (run aborted; re-run to resume)");
            g.failed = true;
            g.runner_meta = {{"error", e.what()}};
        }
        g.created_at = iso_utc_now();
        log.append(g);
    });

    log.rewrite();
    return log.sorted();
}

} // namespace mmkit::bench
