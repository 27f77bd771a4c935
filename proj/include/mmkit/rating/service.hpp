// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkit/bench/item.hpp"
#include "mmkit/bench/runner.hpp"
#include "mmkit/metrics/metrics.hpp"

namespace mmkit::rating {

struct RaterConfig {
    std::map<std::string, std::string> tokens;  // rater_id -> static token
    std::string admin_token;
};

/// {"raters":[{"id","token"}],"admin_token"}; MMKIT_ADMIN_TOKEN overrides
/// the admin token when set.
RaterConfig load_raters(const std::filesystem::path& path);

// Event log -------------------------------------------------------------

enum class EventKind { Rating, Override };

struct Event {
    std::string ts;
    EventKind kind = EventKind::Rating;
    std::string rater;
    std::string item;
    std::string gen_ref;
    int score = 0;
    std::string payload_hash;
    std::size_t batch = 1;  // events written together for one submission

    bool operator==(const Event&) const = default;
};

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

/// Test hooks. `torn_write` returning true makes the appender write only part
/// of a batch and then fail. `after_write` runs once a submission is durable
/// and applied but before it is acknowledged; throwing there models a lost
/// ack.
struct FaultInjector {
    std::function<bool()> torn_write;
    std::function<void()> after_write;
};

/// Single-writer, append-only JSONL log. A submission's events are written
/// in one batch; on open, and after any failed write, a partial trailing
/// batch is cut off so the file always ends on a whole submission.
class EventLog {
  public:
    EventLog(std::filesystem::path path, bool fsync_each = true);
    ~EventLog();
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    /// Events already on disk when the log was opened.
    const std::vector<Event>& recovered() const { return recovered_; }
    void append(const std::vector<Event>& batch);
    std::uint64_t size_bytes() const { return good_size_; }
    void set_faults(FaultInjector faults) { faults_ = std::move(faults); }

    static std::vector<Event> read(const std::filesystem::path& path);

  private:
    void truncate_to_good();
    std::filesystem::path path_;
    bool fsync_each_;
    int fd_ = -1;
    std::uint64_t good_size_ = 0;
    std::vector<Event> recovered_;
    FaultInjector faults_;
};

// State -----------------------------------------------------------------

struct Submission {
    std::string payload_hash;
    std::string ts;
    std::map<std::string, int> scores;  // gen_ref -> score
    std::size_t overrides = 0;
    bool operator==(const Submission&) const = default;
};

/// Effective ratings: (rater, item) -> last submission.
using RatingState = std::map<std::pair<std::string, std::string>, Submission>;

/// Folds a log into the effective state. Later batches for the same
/// (rater, item) replace earlier ones; replaying a retry with an identical
/// payload hash changes nothing.
RatingState replay(const std::vector<Event>& events, RatingState state = {});

nlohmann::json state_to_json(const RatingState& state);
RatingState state_from_json(const nlohmann::json& j);

// Tasks -----------------------------------------------------------------

struct Candidate {
    std::string blind_label;     // "prediction_1".."prediction_n"
    std::string generation_ref;  // server-side only
    std::string text;
};

struct RatingTask {
    std::string item_id;
    std::string dataset;
    std::vector<std::string> image_ids;
    std::string question;
    std::string correct_answer;
    std::vector<Candidate> candidates;
    std::uint64_t order_seed = 0;
};

/// Permutation of 0..n-1 that depends only on (rater, item, order_seed).
std::vector<std::size_t> candidate_order(const std::string& rater_id, const std::string& item_id,
                                         std::uint64_t order_seed, std::size_t n);

/// The rater-facing view: labels and texts only.
nlohmann::json public_task_json(const RatingTask& task, std::size_t done, std::size_t total);

// Service ---------------------------------------------------------------

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct ServiceOptions {
    std::uint64_t order_seed = 0;
    std::chrono::seconds session_ttl{12 * 3600};
    bool fsync_each = true;
    std::size_t snapshot_every = 100;  // submissions; 0 disables snapshots
    Clock clock = [] { return std::chrono::system_clock::now(); };
};

struct SessionInfo {
    std::string token;
    std::size_t remaining = 0;
    std::size_t total = 0;
};

struct Ack {
    std::size_t done = 0;
    std::size_t total = 0;
    bool duplicate = false;  // identical retry, nothing written
    bool overridden = false;
};

struct Export {
    std::vector<nlohmann::json> ratings;  // unblinded, sorted
    nlohmann::json summary;               // per model+mode clinical aggregate
};

/// Data directory layout: items.jsonl, generations.jsonl, images/,
/// events.jsonl (created), snapshot.json (created).
class RatingService {
  public:
    RatingService(const std::filesystem::path& data_dir, RaterConfig raters, ServiceOptions options = {});

    /// Throws Auth for an unknown rater or a token that does not match.
    SessionInfo create_session(const std::string& rater_id, const std::string& token, const std::string& dataset);
    /// Next unrated item for the session's rater, or nullopt when done.
    /// Throws Session for unknown or expired tokens.
    std::optional<RatingTask> next_task(const std::string& session);
    /// Progress (done, total) for the session.
    std::pair<std::size_t, std::size_t> progress(const std::string& session);
    /// Every candidate must be scored with an integer in 0..10.
    Ack submit(const std::string& session, const std::string& item_id, const nlohmann::json& scores);

    bool is_admin(const std::string& token) const;
    Export export_ratings(const std::string& dataset) const;
    /// Path of a stored image, or nullopt.
    std::optional<std::filesystem::path> image_path(const std::string& image_id) const;

    RatingState state() const;
    const std::filesystem::path& log_path() const { return log_path_; }
    void set_faults(FaultInjector faults);
    void write_snapshot();

    std::vector<std::string> datasets() const;

  private:
    struct SessionRecord {
        std::string rater_id;
        std::string dataset;
        std::chrono::system_clock::time_point expires;
    };
    struct ItemEntry {
        bench::VqaItem item;
        std::vector<const bench::Generation*> generations;  // sorted by ref
    };

    SessionRecord session_for(const std::string& token);
    RatingTask build_task(const std::string& rater_id, const ItemEntry& entry) const;
    std::size_t done_count(const std::string& rater_id, const std::string& dataset) const;
    std::size_t total_count(const std::string& dataset) const;
    std::string now_iso() const;
    void write_snapshot_locked();

    std::filesystem::path data_dir_;
    std::filesystem::path log_path_;
    std::filesystem::path snapshot_path_;
    RaterConfig raters_;
    ServiceOptions options_;

    std::vector<bench::VqaItem> items_;
    std::vector<bench::Generation> generations_;
    std::map<std::string, ItemEntry> by_item_;  // item_id order
    std::map<std::string, const bench::Generation*> by_ref_;
    std::map<std::string, std::filesystem::path> images_;

    mutable std::shared_mutex state_mutex_;
    RatingState state_;
    std::size_t since_snapshot_ = 0;
    std::size_t events_count_ = 0;

    std::mutex write_mutex_;  // single writer
    std::unique_ptr<EventLog> log_;
    FaultInjector faults_;

    std::mutex session_mutex_;
    std::map<std::string, SessionRecord> sessions_;
};

/// Canonical hash of a submission payload (item id and label -> score).
std::string payload_hash(const std::string& item_id, const std::map<std::string, int>& scores);

/// Unblinds effective ratings for one dataset and aggregates clinical
/// scores. Throws Integrity when a rating does not join to a generation.
Export build_export(const std::vector<bench::VqaItem>& items, const std::vector<bench::Generation>& generations,
                    const RatingState& state, const std::string& dataset);
/// Export from a data directory without opening the log for writing.
Export export_offline(const std::filesystem::path& data_dir, const std::string& dataset);

/// Serializes an export: ratings.jsonl text and the summary document.
std::string export_ratings_jsonl(const Export& e);

// HTTP ------------------------------------------------------------------

struct HttpOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> static_dir;  // optional UI bundle
};

class HttpFrontend {
  public:
    HttpFrontend(RatingService& service, HttpOptions options);
    ~HttpFrontend();
    /// Binds; returns the bound port (useful with port 0).
    int bind();
    /// Blocks until stop().
    void listen();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace mmkit::rating
