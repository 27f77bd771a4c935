// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include <spdlog/spdlog.h>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/rating/service.hpp"

namespace mmkit::rating {

using nlohmann::json;

namespace {

int status_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Auth:
    case ErrorKind::Session: return 401;
    case ErrorKind::Validation:
    case ErrorKind::Schema:
    case ErrorKind::InvalidArgument: return 400;
    default: return 500;
    }
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view kind, std::string_view message) {
    reply(res, status, {{"error", {{"kind", kind}, {"message", message}}}});
}

// Runs a handler and maps failures onto status codes.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const Error& e) {
        reply_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
    } catch (const json::exception& e) {
        reply_error(res, 400, "schema", e.what());
    } catch (const std::exception& e) {
        spdlog::error("request failed: {}", e.what());
        reply_error(res, 500, "internal", "internal error");
    }
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception&) {
        throw Error(ErrorKind::Validation, "request body is not valid JSON");
    }
}

std::string session_of(const httplib::Request& req) {
    if (req.has_param("session")) return req.get_param_value("session");
    if (req.has_header("X-Session")) return req.get_header_value("X-Session");
    throw Error(ErrorKind::Session, "missing session");
}

std::string bearer(const httplib::Request& req) {
    const std::string auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) return auth.substr(7);
    return req.has_param("token") ? req.get_param_value("token") : "";
}

std::string content_type(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pbm" || ext == ".pnm") return "image/x-portable-anymap";
    return "application/octet-stream";
}

} // namespace

struct HttpFrontend::Impl {
    RatingService& service;
    HttpOptions options;
    httplib::Server server;
    int port = -1;

    Impl(RatingService& s, HttpOptions o) : service(s), options(std::move(o)) { routes(); }

    void routes() {
        server.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json body = parse_body(req);
                const std::string dataset = io::require_string(body, "dataset", "session request");
                const SessionInfo info = service.create_session(io::require_string(body, "rater_id", "session request"),
                                                                body.value("token", ""), dataset);
                reply(res, 200, {{"session", info.token}, {"remaining", info.remaining}, {"total", info.total}});
            });
        });
        server.Get("/task", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string session = session_of(req);
                const auto task = service.next_task(session);
                const auto [done, total] = service.progress(session);
                if (!task) {
                    reply(res, 200, {{"done", true}, {"progress", {{"done", done}, {"total", total}}}});
                    return;
                }
                reply(res, 200, {{"done", false}, {"task", public_task_json(*task, done, total)}});
            });
        });
        server.Post("/rating", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json body = parse_body(req);
                const std::string session =
                    body.contains("session") ? io::require_string(body, "session", "rating") : session_of(req);
                const Ack ack = service.submit(session, io::require_string(body, "item_id", "rating"),
                                               io::require(body, "scores", "rating"));
                reply(res, 200, {{"ok", true},
                                 {"duplicate", ack.duplicate},
                                 {"progress", {{"done", ack.done}, {"total", ack.total}}}});
            });
        });
        server.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                if (!service.is_admin(bearer(req))) {
                    reply_error(res, 403, "auth", "export requires the admin token");
                    return;
                }
                if (!req.has_param("dataset")) throw Error(ErrorKind::Validation, "missing dataset");
                const Export e = service.export_ratings(req.get_param_value("dataset"));
                reply(res, 200, {{"ratings", e.ratings}, {"summary", e.summary}});
            });
        });
        server.Get(R"(/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto path = service.image_path(req.matches[1].str());
                if (!path) {
                    reply_error(res, 404, "not_found", "no such image");
                    return;
                }
                res.set_content(io::read_file(*path), content_type(*path).c_str());
            });
        });
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });
        if (options.static_dir) {
            if (!server.set_mount_point("/", options.static_dir->string()))
                throw Error(ErrorKind::Io, "cannot serve static files from " + options.static_dir->string());
        }
    }
};

HttpFrontend::HttpFrontend(RatingService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind() {
    if (impl_->options.port == 0) impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
    else if (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)) impl_->port = impl_->options.port;
    if (impl_->port <= 0)
        throw Error(ErrorKind::Io, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    return impl_->port;
}

void HttpFrontend::listen() {
    if (impl_->port <= 0) bind();
    spdlog::info("rating service listening on {}:{}", impl_->options.host, impl_->port);
    impl_->server.listen_after_bind();
}

void HttpFrontend::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

} // namespace mmkit::rating
