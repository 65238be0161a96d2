// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <thread>

// Eigen must be parsed before httplib, whose resolver headers define `_res`.
#include "curato/server/session.hpp"

#include <httplib.h>
#include <json.hpp>

namespace curato::server {

inline constexpr int kDefaultPort = 8787;

/// CURATO_PORT when set and valid, else 8787.
inline int port_from_env() {
    const char* v = std::getenv("CURATO_PORT");
    if (!v || !*v) return kDefaultPort;
    char* end = nullptr;
    const long p = std::strtol(v, &end, 10);
    curato::detail::require(end && *end == '\0' && p > 0 && p < 65536, std::string("CURATO_PORT is not a valid port: ") + v);
    return static_cast<int>(p);
}

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = kDefaultPort; ///< 0 picks a free port
    std::filesystem::path commit_dir = "curated";
    std::filesystem::path static_dir; ///< built UI bundle served at "/" when set
};

// JSON views -----------------------------------------------------------------

inline nlohmann::json to_json(const cluster::ReductionSummary& s, const Snapshot* snap = nullptr) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& r : s.classes) {
        nlohmann::json row = {{"class", r.label},      {"total", r.total},
                              {"removed", r.removed},  {"kept", r.kept},
                              {"kept_percent", r.kept_percent}};
        if (snap) {
            const auto it = snap->configs.find(r.label);
            row["clustered"] = it != snap->configs.end();
            if (it != snap->configs.end()) {
                row["eps"] = it->second.eps;
                row["min_pts"] = it->second.min_pts;
                row["clusters"] = snap->cluster_counts.at(r.label);
            }
        }
        classes.push_back(row);
    }
    return {{"total", s.total},         {"removed", s.removed},       {"kept", s.kept},
            {"kept_percent", s.kept_percent}, {"headline", s.headline()}, {"classes", classes}};
}

namespace http_detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
}

inline Label parse_class(const std::string& s) {
    if (s.empty() || s.size() > 5 || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw NotFound("unknown class '" + s + "'");
    const unsigned long v = std::stoul(s);
    if (v > 0xFFFF) throw NotFound("unknown class '" + s + "'");
    return static_cast<Label>(v);
}

/// Runs `fn`, mapping library errors onto status codes.
inline void guarded(httplib::Response& res, int invalid_status, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const NotFound& e) {
        send_error(res, 404, e.what());
    } catch (const Conflict& e) {
        send_error(res, 409, e.what());
    } catch (const ValidationError& e) {
        send_error(res, invalid_status, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

} // namespace http_detail

/// Registers the API routes for `session` on `srv`.
inline void install_routes(httplib::Server& srv, Session& session, const ServerOptions& opt) {
    using namespace http_detail;

    srv.Get("/api/embedding", [&session](const httplib::Request& req, httplib::Response& res) {
        guarded(res, 400, [&] {
            if (!req.has_param("class")) curato::detail::fail("missing query parameter 'class'");
            const Label c = parse_class(req.get_param_value("class"));
            const auto pts = session.points(c);
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& p : pts)
                arr.push_back({{"idx", p.idx}, {"x", p.x}, {"y", p.y}, {"cluster", p.cluster}, {"role", p.role}});
            nlohmann::json body = {{"class", c}, {"count", pts.size()}, {"points", arr}};
            const auto snap = session.snapshot();
            if (const auto it = snap->configs.find(c); it != snap->configs.end()) {
                body["eps"] = it->second.eps;
                body["min_pts"] = it->second.min_pts;
            }
            send_json(res, 200, body);
        });
    });

    srv.Post("/api/cluster", [&session](const httplib::Request& req, httplib::Response& res) {
        guarded(res, 422, [&] {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                curato::detail::fail("request body is not valid JSON");
            }
            if (!j.is_object()) curato::detail::fail("request body must be a JSON object");
            for (const char* k : {"class", "eps", "min_pts"})
                if (!j.contains(k) || !j[k].is_number()) curato::detail::fail(std::string("'") + k + "' must be a number");
            if (!j["class"].is_number_integer() || j["class"].get<long long>() < 0)
                curato::detail::fail("'class' must be a non-negative integer");
            if (!j["min_pts"].is_number_integer() || j["min_pts"].get<long long>() < 1)
                curato::detail::fail("'min_pts' must be an integer >= 1");
            const auto cl = j["class"].get<long long>();
            if (cl > 0xFFFF) throw NotFound("unknown class " + std::to_string(cl));
            const cluster::DbscanConfig cfg{j["eps"].get<double>(), j["min_pts"].get<std::size_t>()};
            const auto u = session.recluster(static_cast<Label>(cl), cfg);
            send_json(res, 200,
                      {{"class", u.label}, {"eps", u.config.eps}, {"min_pts", u.config.min_pts}, {"clusters", u.clusters},
                       {"noise_count", u.noise_count}});
        });
    });

    srv.Post("/api/commit", [&session, dir = opt.commit_dir](const httplib::Request&, httplib::Response& res) {
        guarded(res, 409, [&] {
            const auto r = session.commit(dir);
            send_json(res, 200,
                      {{"path", std::filesystem::absolute(r.path).string()},
                       {"removed", r.manifest.removed.size()},
                       {"kept", r.manifest.kept.size()},
                       {"summary", to_json(r.summary)}});
        });
    });

    srv.Get("/api/summary", [&session](const httplib::Request&, httplib::Response& res) {
        guarded(res, 400, [&] {
            const auto snap = session.snapshot();
            send_json(res, 200, to_json(session.summary(), snap.get()));
        });
    });

    if (!opt.static_dir.empty()) {
        if (!srv.set_mount_point("/", opt.static_dir.string()))
            curato::detail::fail("static directory not found: " + opt.static_dir.string());
    }
}

/// HTTP front end running on a background thread.
class CurationServer {
public:
    CurationServer(Session& session, ServerOptions opt) : session_(session), opt_(std::move(opt)) {
        install_routes(srv_, session_, opt_);
    }
    ~CurationServer() { stop(); }
    CurationServer(const CurationServer&) = delete;
    CurationServer& operator=(const CurationServer&) = delete;

    /// Binds and starts serving; returns the bound port.
    int start() {
        if (opt_.port == 0)
            port_ = srv_.bind_to_any_port(opt_.host);
        else
            port_ = srv_.bind_to_port(opt_.host, opt_.port) ? opt_.port : -1;
        if (port_ <= 0) throw RuntimeError("cannot bind " + opt_.host + ":" + std::to_string(opt_.port));
        thread_ = std::thread([this] { srv_.listen_after_bind(); });
        srv_.wait_until_ready();
        return port_;
    }

    /// Serves on the calling thread until stopped.
    void run() {
        if (!srv_.listen(opt_.host, opt_.port)) throw RuntimeError("cannot listen on " + opt_.host + ":" + std::to_string(opt_.port));
    }

    void stop() {
        srv_.stop();
        if (thread_.joinable()) thread_.join();
    }

    [[nodiscard]] int port() const { return port_; }

private:
    Session& session_;
    ServerOptions opt_;
    httplib::Server srv_;
    std::thread thread_;
    int port_ = -1;
};

} // namespace curato::server
