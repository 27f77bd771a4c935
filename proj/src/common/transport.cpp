// SPDX-License-Identifier: Apache-2.0
#include "mmkit/common/transport.hpp"

#include <csignal>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "mmkit/common/error.hpp"

namespace mmkit {

HttpTransport::HttpTransport(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

Json HttpTransport::call(const std::string& path, const Json& request) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto result = client.Post(path, request.dump(), "application/json");
    if (!result) {
        throw Error(ErrorKind::Transport,
                    "POST " + base_url_ + path + " failed: " + httplib::to_string(result.error()));
    }
    if (result->status >= 500) {
        throw Error(ErrorKind::Transport, "POST " + base_url_ + path + " returned " + std::to_string(result->status));
    }
    if (result->status >= 400) {
        throw Error(ErrorKind::Validation, "POST " + base_url_ + path + " returned " +
                                               std::to_string(result->status) + ": " + result->body);
    }
    try {
        return Json::parse(result->body);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Transport, "malformed JSON from " + base_url_ + path + ": " + e.what());
    }
}

ProcessTransport::ProcessTransport(const std::string& command) {
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw Error(ErrorKind::Transport, "pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw Error(ErrorKind::Transport, "fork() failed");
    if (pid_ == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

ProcessTransport::~ProcessTransport() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        // Give the child a moment to exit on EOF before terminating it.
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, &status, WNOHANG) == pid_) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        kill(pid_, SIGTERM);
        waitpid(pid_, &status, 0);
    }
}

std::string ProcessTransport::read_line() {
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(ErrorKind::Transport, "child process closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

Json ProcessTransport::call(const std::string& /*path*/, const Json& request) {
    std::lock_guard lock(mutex_);
    std::string line = request.dump();
    line.push_back('\n');
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(ErrorKind::Transport, "child process closed its input");
        written += static_cast<std::size_t>(n);
    }
    const std::string reply = read_line();
    try {
        return Json::parse(reply);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Transport, std::string("malformed JSON from child: ") + e.what());
    }
}

Json call_with_retry(JsonTransport& transport, const std::string& path, const Json& request,
                     const RetryPolicy& policy) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return transport.call(path, request);
        } catch (const Error& e) {
            if (!e.retryable() || attempt >= policy.attempts) throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

std::unique_ptr<JsonTransport> make_transport(const std::string& endpoint) {
    if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0)
        return std::make_unique<HttpTransport>(endpoint);
    return std::make_unique<ProcessTransport>(endpoint);
}

} // namespace mmkit
