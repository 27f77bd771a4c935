// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "mmkit/common/clock.hpp"
#include "mmkit/common/error.hpp"
#include "mmkit/common/hash.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/rng.hpp"
#include "mmkit/rating/service.hpp"

namespace mmkit::rating {

using nlohmann::json;
namespace fs = std::filesystem;

RaterConfig load_raters(const fs::path& path) {
    const json j = io::read_json(path);
    RaterConfig cfg;
    for (const auto& r : io::require(j, "raters", "raters file")) {
        const std::string id = io::require_string(r, "id", "rater");
        const std::string token = io::require_string(r, "token", "rater");
        if (id.empty() || token.empty()) throw Error(ErrorKind::Schema, "rater id and token must be non-empty");
        if (!cfg.tokens.emplace(id, token).second) throw Error(ErrorKind::DuplicateId, "duplicate rater '" + id + "'");
    }
    cfg.admin_token = j.value("admin_token", "");
    if (const char* env = std::getenv("MMKIT_ADMIN_TOKEN"); env && *env) cfg.admin_token = env;
    return cfg;
}

std::vector<std::size_t> candidate_order(const std::string& rater_id, const std::string& item_id,
                                         std::uint64_t order_seed, std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    DeterministicRng rng(hash::keyed(rater_id + '\x1f' + item_id, order_seed));
    rng.shuffle(std::span<std::size_t>(order));
    return order;
}

json public_task_json(const RatingTask& task, std::size_t done, std::size_t total) {
    json images = json::array();
    for (const auto& id : task.image_ids) images.push_back("/image/" + id);
    json candidates = json::array();
    for (const auto& c : task.candidates) candidates.push_back({{"blind_label", c.blind_label}, {"text", c.text}});
    return {{"item_id", task.item_id},
            {"image_urls", std::move(images)},
            {"question", task.question},
            {"correct_answer", task.correct_answer},
            {"candidates", std::move(candidates)},
            {"progress", {{"done", done}, {"total", total}}}};
}

std::string payload_hash(const std::string& item_id, const std::map<std::string, int>& scores) {
    const json canonical = {{"item", item_id}, {"scores", scores}};
    return hash::sha256_hex(canonical.dump());
}

namespace {

std::string random_token() {
    std::random_device rd;
    std::string out;
    for (int i = 0; i < 4; ++i) out += hash::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd()).substr(8);
    return out;
}

std::optional<fs::path> local_path(const std::string& uri, const fs::path& base) {
    std::string p = uri;
    if (p.rfind("file://", 0) == 0) p = p.substr(7);
    else if (p.find("://") != std::string::npos) return std::nullopt;
    fs::path path(p);
    if (path.is_relative()) path = base / path;
    if (!fs::is_regular_file(path)) return std::nullopt;
    return path;
}

} // namespace

RatingService::RatingService(const fs::path& data_dir, RaterConfig raters, ServiceOptions options)
    : data_dir_(data_dir), log_path_(data_dir / "events.jsonl"), snapshot_path_(data_dir / "snapshot.json"),
      raters_(std::move(raters)), options_(std::move(options)) {
    if (!fs::is_directory(data_dir_)) throw Error(ErrorKind::Io, "data dir " + data_dir_.string() + " does not exist");
    items_ = bench::load_dataset(data_dir_ / "items.jsonl", bench::DatasetFormat::UsmleJsonl);
    generations_ = bench::load_generations(data_dir_ / "generations.jsonl");

    for (const auto& item : items_) by_item_[item.item_id].item = item;
    for (const auto& g : generations_) {
        if (g.failed) continue;
        const auto it = by_item_.find(g.item_id);
        if (it == by_item_.end())
            throw Error(ErrorKind::Integrity, "generation for unknown item '" + g.item_id + "'");
        const std::string ref = bench::generation_ref(g);
        if (!by_ref_.emplace(ref, &g).second) throw Error(ErrorKind::DuplicateId, "duplicate generation " + ref);
        it->second.generations.push_back(&g);
    }
    for (auto& [id, entry] : by_item_) {
        std::sort(entry.generations.begin(), entry.generations.end(), [](const auto* a, const auto* b) {
            return bench::generation_ref(*a) < bench::generation_ref(*b);
        });
    }

    if (fs::is_directory(data_dir_ / "images")) {
        for (const auto& f : fs::directory_iterator(data_dir_ / "images"))
            if (f.is_regular_file()) images_.emplace(f.path().stem().string(), f.path());
    }
    for (const auto& item : items_) {
        for (std::size_t i = 0; i < item.image_ids.size(); ++i) {
            if (images_.count(item.image_ids[i])) continue;
            if (auto p = local_path(item.image_uris[i], data_dir_)) images_.emplace(item.image_ids[i], *p);
        }
    }

    log_ = std::make_unique<EventLog>(log_path_, options_.fsync_each);
    const auto& events = log_->recovered();
    std::size_t from = 0;
    RatingState base;
    if (fs::exists(snapshot_path_)) {
        try {
            const json snap = io::read_json(snapshot_path_);
            const std::size_t covered = snap.at("events").get<std::size_t>();
            if (covered <= events.size()) {
                base = state_from_json(snap.at("state"));
                from = covered;
            } else {
                spdlog::warn("snapshot covers {} events but the log has {}; replaying from the start", covered,
                             events.size());
            }
        } catch (const std::exception& e) {
            spdlog::warn("ignoring unreadable snapshot: {}", e.what());
            base.clear();
            from = 0;
        }
    }
    state_ = replay(std::vector<Event>(events.begin() + static_cast<std::ptrdiff_t>(from), events.end()), std::move(base));
    events_count_ = events.size();

    for (const auto& [key, s] : state_) {
        for (const auto& [ref, score] : s.scores) {
            const auto it = by_ref_.find(ref);
            if (it == by_ref_.end() || it->second->item_id != key.second)
                throw Error(ErrorKind::Integrity, "event log rating of " + ref + " does not join to a generation of " +
                                                      key.second);
        }
    }
    spdlog::info("rating service: {} items, {} generations, {} effective submissions", items_.size(), by_ref_.size(),
                 state_.size());
}

std::string RatingService::now_iso() const { return iso_utc(options_.clock()); }

std::vector<std::string> RatingService::datasets() const {
    std::vector<std::string> out;
    for (const auto& [id, entry] : by_item_)
        if (std::find(out.begin(), out.end(), entry.item.dataset) == out.end()) out.push_back(entry.item.dataset);
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t RatingService::total_count(const std::string& dataset) const {
    std::size_t n = 0;
    for (const auto& [id, entry] : by_item_) n += entry.item.dataset == dataset && !entry.generations.empty();
    return n;
}

std::size_t RatingService::done_count(const std::string& rater_id, const std::string& dataset) const {
    std::shared_lock lock(state_mutex_);
    std::size_t n = 0;
    for (auto it = state_.lower_bound({rater_id, ""}); it != state_.end() && it->first.first == rater_id; ++it) {
        const auto e = by_item_.find(it->first.second);
        n += e != by_item_.end() && e->second.item.dataset == dataset;
    }
    return n;
}

SessionInfo RatingService::create_session(const std::string& rater_id, const std::string& token,
                                          const std::string& dataset) {
    const auto it = raters_.tokens.find(rater_id);
    if (it == raters_.tokens.end()) throw Error(ErrorKind::Auth, "unknown rater");
    if (it->second != token) throw Error(ErrorKind::Auth, "invalid rater token");
    const std::size_t total = total_count(dataset);
    if (total == 0) spdlog::warn("dataset '{}' has no ratable items", dataset);
    SessionInfo info;
    info.token = random_token();
    info.total = total;
    info.remaining = total - done_count(rater_id, dataset);
    std::lock_guard lock(session_mutex_);
    sessions_[info.token] = {rater_id, dataset, options_.clock() + options_.session_ttl};
    return info;
}

RatingService::SessionRecord RatingService::session_for(const std::string& token) {
    std::lock_guard lock(session_mutex_);
    const auto it = sessions_.find(token);
    if (it == sessions_.end()) throw Error(ErrorKind::Session, "unknown session");
    if (options_.clock() >= it->second.expires) {
        sessions_.erase(it);
        throw Error(ErrorKind::Session, "session expired");
    }
    return it->second;
}

RatingTask RatingService::build_task(const std::string& rater_id, const ItemEntry& entry) const {
    RatingTask task;
    task.item_id = entry.item.item_id;
    task.dataset = entry.item.dataset;
    task.image_ids = entry.item.image_ids;
    task.question = entry.item.question;
    task.correct_answer = entry.item.answer;
    task.order_seed = options_.order_seed;
    const auto order = candidate_order(rater_id, task.item_id, options_.order_seed, entry.generations.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const bench::Generation* g = entry.generations[order[i]];
        task.candidates.push_back({"prediction_" + std::to_string(i + 1), bench::generation_ref(*g), g->text});
    }
    return task;
}

std::optional<RatingTask> RatingService::next_task(const std::string& session) {
    const SessionRecord s = session_for(session);
    std::shared_lock lock(state_mutex_);
    for (const auto& [id, entry] : by_item_) {
        if (entry.item.dataset != s.dataset || entry.generations.empty()) continue;
        if (state_.count({s.rater_id, id})) continue;
        return build_task(s.rater_id, entry);
    }
    return std::nullopt;
}

std::pair<std::size_t, std::size_t> RatingService::progress(const std::string& session) {
    const SessionRecord s = session_for(session);
    return {done_count(s.rater_id, s.dataset), total_count(s.dataset)};
}

Ack RatingService::submit(const std::string& session, const std::string& item_id, const json& scores) {
    const SessionRecord s = session_for(session);
    const auto entry = by_item_.find(item_id);
    if (entry == by_item_.end() || entry->second.item.dataset != s.dataset || entry->second.generations.empty())
        throw Error(ErrorKind::Validation, "item '" + item_id + "' is not part of this session's tasks");
    if (!scores.is_object()) throw Error(ErrorKind::Validation, "scores must be an object of label -> integer");

    const RatingTask task = build_task(s.rater_id, entry->second);
    std::map<std::string, std::string> label_to_ref;
    for (const auto& c : task.candidates) label_to_ref[c.blind_label] = c.generation_ref;

    std::map<std::string, int> by_label;
    for (const auto& [label, value] : scores.items()) {
        if (!label_to_ref.count(label)) throw Error(ErrorKind::Validation, "unknown label '" + label + "'");
        if (!value.is_number_integer()) throw Error(ErrorKind::Validation, "score for " + label + " must be an integer");
        const auto v = value.get<long long>();
        if (v < metrics::kMinScore || v > metrics::kMaxScore)
            throw Error(ErrorKind::Validation, "score for " + label + " is outside [0, 10]");
        by_label[label] = static_cast<int>(v);
    }
    if (by_label.size() != label_to_ref.size())
        throw Error(ErrorKind::Validation, "all " + std::to_string(label_to_ref.size()) + " candidates must be scored");

    const std::string hash = payload_hash(item_id, by_label);
    Ack ack;
    {
        std::lock_guard writer(write_mutex_);
        bool exists = false;
        {
            std::shared_lock read(state_mutex_);
            const auto it = state_.find({s.rater_id, item_id});
            exists = it != state_.end();
            ack.duplicate = exists && it->second.payload_hash == hash;
        }
        if (!ack.duplicate) {
            const std::string ts = now_iso();
            std::vector<Event> batch;
            for (const auto& [label, score] : by_label) {
                Event e;
                e.ts = ts;
                e.kind = exists ? EventKind::Override : EventKind::Rating;
                e.rater = s.rater_id;
                e.item = item_id;
                e.gen_ref = label_to_ref.at(label);
                e.score = score;
                e.payload_hash = hash;
                e.batch = by_label.size();
                batch.push_back(std::move(e));
            }
            log_->append(batch);
            {
                std::unique_lock write(state_mutex_);
                state_ = replay(batch, std::move(state_));
            }
            events_count_ += batch.size();
            ack.overridden = exists;
            if (exists) spdlog::info("rater {} overrode ratings for {}", s.rater_id, item_id);
            if (options_.snapshot_every > 0 && ++since_snapshot_ >= options_.snapshot_every) {
                try {
                    write_snapshot_locked();
                } catch (const std::exception& e) {
                    spdlog::warn("snapshot failed: {}", e.what());
                }
            }
        }
        if (faults_.after_write) faults_.after_write();
    }
    ack.done = done_count(s.rater_id, s.dataset);
    ack.total = total_count(s.dataset);
    return ack;
}

void RatingService::write_snapshot_locked() {
    json snap;
    {
        std::shared_lock read(state_mutex_);
        snap = {{"events", events_count_}, {"state", state_to_json(state_)}};
    }
    io::write_json_atomic(snapshot_path_, snap, -1);
    since_snapshot_ = 0;
}

void RatingService::write_snapshot() {
    std::lock_guard writer(write_mutex_);
    write_snapshot_locked();
}

void RatingService::set_faults(FaultInjector faults) {
    std::lock_guard writer(write_mutex_);
    log_->set_faults(faults);
    faults_ = std::move(faults);
}

bool RatingService::is_admin(const std::string& token) const {
    return !raters_.admin_token.empty() && token == raters_.admin_token;
}

RatingState RatingService::state() const {
    std::shared_lock lock(state_mutex_);
    return state_;
}

Export build_export(const std::vector<bench::VqaItem>& items, const std::vector<bench::Generation>& generations,
                    const RatingState& state, const std::string& dataset) {
    std::map<std::string, const bench::VqaItem*> item_by_id;
    for (const auto& item : items) item_by_id[item.item_id] = &item;
    std::map<std::string, const bench::Generation*> by_ref;
    std::vector<bench::Generation> in_dataset;
    for (const auto& g : generations) {
        if (g.failed) continue;
        const auto it = item_by_id.find(g.item_id);
        if (it == item_by_id.end() || it->second->dataset != dataset) continue;
        by_ref[bench::generation_ref(g)] = &g;
        in_dataset.push_back(g);
    }

    Export out;
    std::vector<metrics::Rating> ratings;
    for (const auto& [key, s] : state) {
        const auto item = item_by_id.find(key.second);
        if (item == item_by_id.end()) throw Error(ErrorKind::Integrity, "rating for unknown item '" + key.second + "'");
        if (item->second->dataset != dataset) continue;
        for (const auto& [ref, score] : s.scores) {
            const auto g = by_ref.find(ref);
            if (g == by_ref.end() || g->second->item_id != key.second)
                throw Error(ErrorKind::Integrity, "rating of " + ref + " does not join to a generation of " + key.second);
            ratings.push_back(metrics::make_rating(key.first, key.second, ref, score, s.ts));
            out.ratings.push_back({{"rater_id", key.first},
                                   {"item_id", key.second},
                                   {"generation_ref", ref},
                                   {"model_id", g->second->model_id},
                                   {"mode", bench::to_string(g->second->mode)},
                                   {"score", score},
                                   {"submitted_at", s.ts},
                                   {"overrides", s.overrides}});
        }
    }
    std::sort(out.ratings.begin(), out.ratings.end(), [](const json& a, const json& b) {
        return std::tie(a["item_id"].get_ref<const std::string&>(), a["generation_ref"].get_ref<const std::string&>(),
                        a["rater_id"].get_ref<const std::string&>()) <
               std::tie(b["item_id"].get_ref<const std::string&>(), b["generation_ref"].get_ref<const std::string&>(),
                        b["rater_id"].get_ref<const std::string&>());
    });

    json per_model = json::array();
    if (!ratings.empty()) {
        for (const auto& [key, score] : metrics::clinical_aggregate(ratings, in_dataset)) {
            if (score.rated == 0) continue;
            per_model.push_back({{"model_id", key.model_id},
                                 {"mode", bench::to_string(key.mode)},
                                 {"clinical", score.score},
                                 {"rated", score.rated},
                                 {"unrated", score.unrated}});
        }
    }
    out.summary = {{"dataset", dataset}, {"n_ratings", ratings.size()}, {"per_model", std::move(per_model)}};
    return out;
}

Export export_offline(const fs::path& data_dir, const std::string& dataset) {
    const auto items = bench::load_dataset(data_dir / "items.jsonl", bench::DatasetFormat::UsmleJsonl);
    const auto generations = bench::load_generations(data_dir / "generations.jsonl");
    return build_export(items, generations, replay(EventLog::read(data_dir / "events.jsonl")), dataset);
}

Export RatingService::export_ratings(const std::string& dataset) const {
    return build_export(items_, generations_, state(), dataset);
}

std::optional<fs::path> RatingService::image_path(const std::string& image_id) const {
    const auto it = images_.find(image_id);
    if (it == images_.end()) return std::nullopt;
    return it->second;
}

std::string export_ratings_jsonl(const Export& e) {
    std::string out;
    for (const auto& r : e.ratings) {
        out += r.dump();
        out.push_back('\n');
    }
    return out;
}

} // namespace mmkit::rating
