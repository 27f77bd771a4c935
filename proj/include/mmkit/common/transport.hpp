// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

namespace mmkit {

using Json = nlohmann::json;

/// Request/response channel to an external service. Every client protocol
/// in the toolkit (model runner, embedders, title classifier) is a JSON
/// object in and a JSON object out, carried either over HTTP or as one line
/// per message on a child process's standard streams.
class JsonTransport {
  public:
    virtual ~JsonTransport() = default;

    /// Throws Error{Transport} on connection or protocol failure.
    virtual Json call(const std::string& path, const Json& request) = 0;
};

/// POSTs to `<base_url><path>`. base_url is scheme://host[:port].
class HttpTransport final : public JsonTransport {
  public:
    explicit HttpTransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120));
    Json call(const std::string& path, const Json& request) override;

  private:
    std::string base_url_;
    std::chrono::seconds timeout_;
};

/// Spawns `/bin/sh -c command` once and exchanges one JSON line per call.
/// Calls are serialized; the path argument is ignored since the child
/// speaks exactly one protocol.
class ProcessTransport final : public JsonTransport {
  public:
    explicit ProcessTransport(const std::string& command);
    ~ProcessTransport() override;
    ProcessTransport(const ProcessTransport&) = delete;
    ProcessTransport& operator=(const ProcessTransport&) = delete;

    Json call(const std::string& path, const Json& request) override;

  private:
    std::string read_line();

    std::mutex mutex_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
};

/// Retries Transport errors with exponential backoff; all other errors
/// propagate immediately.
Json call_with_retry(JsonTransport& transport, const std::string& path, const Json& request,
                     const RetryPolicy& policy);

/// "http://..." → HttpTransport; anything else is a shell command.
std::unique_ptr<JsonTransport> make_transport(const std::string& endpoint);

} // namespace mmkit
