// SPDX-License-Identifier: Apache-2.0
#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/rating/service.hpp"

namespace mmkit::rating {

using nlohmann::json;

json to_json(const Event& e) {
    return {{"ts", e.ts},
            {"kind", e.kind == EventKind::Rating ? "rating" : "override"},
            {"rater", e.rater},
            {"item", e.item},
            {"gen_ref", e.gen_ref},
            {"score", e.score},
            {"payload_hash", e.payload_hash},
            {"batch", e.batch}};
}

Event event_from_json(const json& j) {
    Event e;
    e.ts = io::require_string(j, "ts", "event");
    const std::string kind = io::require_string(j, "kind", "event");
    if (kind == "rating") e.kind = EventKind::Rating;
    else if (kind == "override") e.kind = EventKind::Override;
    else throw Error(ErrorKind::Schema, "event: unknown kind '" + kind + "'");
    e.rater = io::require_string(j, "rater", "event");
    e.item = io::require_string(j, "item", "event");
    e.gen_ref = io::require_string(j, "gen_ref", "event");
    const json& score = io::require(j, "score", "event");
    if (!score.is_number_integer()) throw Error(ErrorKind::Schema, "event: score must be an integer");
    e.score = score.get<int>();
    e.payload_hash = io::require_string(j, "payload_hash", "event");
    e.batch = j.value("batch", std::size_t{1});
    if (e.batch == 0) throw Error(ErrorKind::Schema, "event: batch must be positive");
    return e;
}

namespace {

struct Scan {
    std::vector<Event> events;
    std::uint64_t good_size = 0;
    std::uint64_t file_size = 0;
};

// Accepts whole batches only; stops at the first line that does not parse
// or a batch that is cut short.
Scan scan(const std::string& data) {
    Scan out;
    out.file_size = data.size();
    std::size_t pos = 0;
    std::vector<Event> pending;
    std::size_t pending_end = 0;
    while (pos < data.size()) {
        const std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) break;
        const std::string_view line(data.data() + pos, nl - pos);
        Event e;
        try {
            e = event_from_json(json::parse(line));
        } catch (const std::exception&) {
            break;
        }
        if (!pending.empty()) {
            const Event& head = pending.front();
            if (e.rater != head.rater || e.item != head.item || e.payload_hash != head.payload_hash || e.batch != head.batch)
                break;
        }
        pending.push_back(std::move(e));
        pos = nl + 1;
        if (pending.size() == pending.front().batch) {
            for (auto& p : pending) out.events.push_back(std::move(p));
            pending.clear();
            pending_end = pos;
            out.good_size = pending_end;
        }
    }
    return out;
}

} // namespace

std::vector<Event> EventLog::read(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    return scan(io::read_file(path)).events;
}

EventLog::EventLog(std::filesystem::path path, bool fsync_each) : path_(std::move(path)), fsync_each_(fsync_each) {
    std::string data;
    if (std::filesystem::exists(path_)) data = io::read_file(path_);
    Scan s = scan(data);
    recovered_ = std::move(s.events);
    good_size_ = s.good_size;
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorKind::Io, "cannot open event log " + path_.string() + ": " + std::strerror(errno));
    if (s.file_size != s.good_size) {
        spdlog::warn("event log {}: dropping {} bytes of incomplete trailing batch", path_.string(),
                     s.file_size - s.good_size);
        truncate_to_good();
    }
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

void EventLog::truncate_to_good() {
    if (::ftruncate(fd_, static_cast<off_t>(good_size_)) != 0)
        throw Error(ErrorKind::Io, "cannot truncate event log: " + std::string(std::strerror(errno)));
    if (fsync_each_) ::fsync(fd_);
}

void EventLog::append(const std::vector<Event>& batch) {
    if (batch.empty()) return;
    std::string bytes;
    for (const auto& e : batch) {
        bytes += to_json(e).dump();
        bytes.push_back('\n');
    }
    std::size_t limit = bytes.size();
    const bool torn = faults_.torn_write && faults_.torn_write();
    if (torn) limit = bytes.size() / 2;

    std::size_t written = 0;
    try {
        while (written < limit) {
            const ssize_t n = ::pwrite(fd_, bytes.data() + written, limit - written, static_cast<off_t>(good_size_ + written));
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorKind::Io, "event log write failed: " + std::string(std::strerror(errno)));
            }
            written += static_cast<std::size_t>(n);
        }
        if (torn) throw Error(ErrorKind::Io, "event log write interrupted");
        if (fsync_each_ && ::fsync(fd_) != 0)
            throw Error(ErrorKind::Io, "event log fsync failed: " + std::string(std::strerror(errno)));
    } catch (...) {
        truncate_to_good();
        throw;
    }
    good_size_ += bytes.size();
}

RatingState replay(const std::vector<Event>& events, RatingState state) {
    std::size_t i = 0;
    while (i < events.size()) {
        const Event& head = events[i];
        if (i + head.batch > events.size()) throw Error(ErrorKind::Integrity, "event log ends inside a batch");
        const auto key = std::make_pair(head.rater, head.item);
        auto it = state.find(key);
        if (it == state.end() || it->second.payload_hash != head.payload_hash) {
            Submission s;
            s.payload_hash = head.payload_hash;
            s.ts = head.ts;
            s.overrides = it == state.end() ? 0 : it->second.overrides + 1;
            for (std::size_t k = 0; k < head.batch; ++k) {
                const Event& e = events[i + k];
                if (e.rater != head.rater || e.item != head.item || e.payload_hash != head.payload_hash)
                    throw Error(ErrorKind::Integrity, "event log batch mixes submissions");
                if (!s.scores.emplace(e.gen_ref, e.score).second)
                    throw Error(ErrorKind::Integrity, "event log batch rates " + e.gen_ref + " twice");
            }
            state[key] = std::move(s);
        }
        i += head.batch;
    }
    return state;
}

json state_to_json(const RatingState& state) {
    json out = json::array();
    for (const auto& [key, s] : state) {
        out.push_back({{"rater", key.first},
                       {"item", key.second},
                       {"payload_hash", s.payload_hash},
                       {"ts", s.ts},
                       {"scores", s.scores},
                       {"overrides", s.overrides}});
    }
    return out;
}

RatingState state_from_json(const json& j) {
    RatingState state;
    for (const auto& r : j) {
        Submission s;
        s.payload_hash = io::require_string(r, "payload_hash", "snapshot");
        s.ts = io::require_string(r, "ts", "snapshot");
        s.scores = io::require(r, "scores", "snapshot").get<std::map<std::string, int>>();
        s.overrides = r.value("overrides", std::size_t{0});
        state[{io::require_string(r, "rater", "snapshot"), io::require_string(r, "item", "snapshot")}] = std::move(s);
    }
    return state;
}

} // namespace mmkit::rating
