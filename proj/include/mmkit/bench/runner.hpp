// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkit/bench/prompt.hpp"
#include "mmkit/common/transport.hpp"

namespace mmkit::bench {

enum class Mode { ZeroShot, FewShot, FineTuned };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct Generation {
    std::string item_id;
    std::string model_id;
    Mode mode = Mode::ZeroShot;
    std::string text;
    std::string created_at;  // ISO-8601 UTC
    nlohmann::json runner_meta = nlohmann::json::object();
    bool failed = false;

    bool operator==(const Generation&) const = default;
};

/// Opaque, stable id for a generation: does not reveal model or mode.
std::string generation_ref(const std::string& item_id, const std::string& model_id, Mode mode);
inline std::string generation_ref(const Generation& g) { return generation_ref(g.item_id, g.model_id, g.mode); }

nlohmann::json to_json(const Generation& g);
Generation generation_from_json(const nlohmann::json& j);
std::vector<Generation> load_generations(const std::filesystem::path& path);

struct DecodeConfig {
    std::size_t max_new_tokens = 128;
    std::vector<std::string> stop = {std::string(media::kEndOfChunk)};
    std::size_t parallelism = 4;
    RetryPolicy retry{};
};

struct RunnerReply {
    std::string text;
    nlohmann::json meta = nlohmann::json::object();
};

/// Request payload: {"item_id","tokens","media","image_uris","max_new_tokens",
/// "stop","prompt"}; reply {"text","meta"} or {"error"}.
nlohmann::json make_runner_request(const FewShotPrompt& prompt, const DecodeConfig& decode);

class ModelRunnerClient {
  public:
    virtual ~ModelRunnerClient() = default;
    /// Throws Transport for connectivity failures; any other Error marks just
    /// this item as failed.
    virtual RunnerReply generate(const nlohmann::json& request) = 0;
};

class RemoteRunner final : public ModelRunnerClient {
  public:
    explicit RemoteRunner(std::unique_ptr<JsonTransport> transport, RetryPolicy retry = {});
    RunnerReply generate(const nlohmann::json& request) override;

  private:
    std::unique_ptr<JsonTransport> transport_;
    RetryPolicy retry_;
};

/// Answers every request with the gold answer of the requested item.
class EchoRunner final : public ModelRunnerClient {
  public:
    explicit EchoRunner(const std::vector<VqaItem>& gold);
    RunnerReply generate(const nlohmann::json& request) override;

  private:
    std::map<std::string, std::string> answers_;
};

class FixedRunner final : public ModelRunnerClient {
  public:
    explicit FixedRunner(std::string text) : text_(std::move(text)) {}
    RunnerReply generate(const nlohmann::json&) override { return {text_, {{"runner", "fixed"}}}; }

  private:
    std::string text_;
};

struct RunIdentity {
    std::string model_id;
    std::optional<Mode> mode;  // default: zero_shot without shots, few_shot otherwise
};

/// Generates one answer per prompt. When results_path is given, completed
/// generations are appended as they finish and items already completed
/// there are skipped, so an interrupted run resumes. A Transport error that
/// survives retries aborts the run (rethrown) with the file left resumable.
/// On success the file is rewritten sorted by item_id.
std::vector<Generation> run_generation(const std::vector<FewShotPrompt>& prompts, ModelRunnerClient& runner,
                                       const DecodeConfig& decode, const RunIdentity& identity,
                                       const std::optional<std::filesystem::path>& results_path = std::nullopt);

} // namespace mmkit::bench
