#pragma once

// Wire API under /v1. Request/response bodies mirror the domain types
// field-for-field; every query response carries the full evidence bundle so
// clients can audit answers. Errors map onto one ApiError code each:
//   validation -> 400, conflict -> 409, immutability -> 409,
//   stale_target -> 409, provider_unavailable -> 503, internal -> 500

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"

#include "engram/engine.hpp"

namespace engram {

struct ApiError {
    std::string code;
    std::string message;
};

inline void to_json(json& j, const ApiError& e) {
    j = json{{"error", {{"code", e.code}, {"message", e.message}}}};
}

namespace service_detail {

inline std::pair<int, std::string> wire_error(const EngineError& e) {
    switch (e.code()) {
        case ErrorCode::validation: return {400, "validation"};
        case ErrorCode::conflict: return {409, "conflict"};
        case ErrorCode::immutability: return {409, "immutability"};
        case ErrorCode::stale_target: return {409, "stale_target"};
        case ErrorCode::provider_unavailable: return {503, "provider_unavailable"};
        case ErrorCode::parse: return {503, "provider_unavailable"};
        case ErrorCode::script:
        case ErrorCode::io:
        case ErrorCode::internal: return {500, "internal"};
    }
    return {500, "internal"};
}

} // namespace service_detail

class MemoryService {
public:
    MemoryService(std::shared_ptr<MemoryEngine> engine, ServiceConfig config)
        : engine_(std::move(engine)), config_(std::move(config)) {
        install_routes();
    }

    // Blocks until stop(). Returns false on bind failure.
    bool serve() {
        if (!server_.bind_to_port(config_.host, config_.port)) return false;
        bound_port_ = config_.port;
        return server_.listen_after_bind();
    }

    // Background variant for tests and embedding: binds an ephemeral port
    // when config.port is 0.
    bool start() {
        if (config_.port == 0) {
            bound_port_ = server_.bind_to_any_port(config_.host);
            if (bound_port_ < 0) return false;
        } else {
            if (!server_.bind_to_port(config_.host, config_.port)) return false;
            bound_port_ = config_.port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return true;
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~MemoryService() { stop(); }

    int port() const { return bound_port_; }

    std::int64_t total_requests() const {
        std::lock_guard<std::mutex> lock(counter_mutex_);
        return total_requests_;
    }

    std::map<std::string, std::int64_t> endpoint_counters() const {
        std::lock_guard<std::mutex> lock(counter_mutex_);
        return endpoint_counters_;
    }

private:
    using Request = httplib::Request;
    using Response = httplib::Response;

    void count_total() {
        std::lock_guard<std::mutex> lock(counter_mutex_);
        ++total_requests_;
    }

    void count_endpoint(const std::string& name) {
        std::lock_guard<std::mutex> lock(counter_mutex_);
        ++endpoint_counters_[name];
    }

    static void reply_json(Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void reply_error(Response& res, const EngineError& e) {
        auto [status, code] = service_detail::wire_error(e);
        reply_json(res, status, json(ApiError{code, e.what()}));
    }

    template <typename Fn>
    auto guarded(const std::string& name, Fn fn) {
        return [this, name, fn](const Request& req, Response& res) {
            count_endpoint(name);
            try {
                fn(req, res);
            } catch (const EngineError& e) {
                reply_error(res, e);
            } catch (const json::exception& e) {
                reply_json(res, 400, json(ApiError{"validation", e.what()}));
            } catch (const std::exception& e) {
                reply_json(res, 500, json(ApiError{"internal", e.what()}));
            }
        };
    }

    static json parse_body(const Request& req) {
        if (req.body.empty()) return json::object();
        try {
            return json::parse(req.body);
        } catch (const json::exception& e) {
            throw validation_error(std::string{"request body is not valid JSON: "} + e.what());
        }
    }

    void install_routes() {
        server_.set_pre_routing_handler([this](const Request& req, Response& res) {
            count_total();
            if (!config_.bearer_token.empty() && req.path.rfind("/v1/", 0) == 0) {
                if (req.get_header_value("Authorization") != "Bearer " + config_.bearer_token) {
                    count_endpoint("unauthorized");
                    reply_json(res, 401, json(ApiError{"validation", "missing or bad bearer token"}));
                    return httplib::Server::HandlerResponse::Handled;
                }
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });

        // unrouted paths and other framework-produced errors
        server_.set_error_handler([this](const Request&, Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            count_endpoint("unmatched");
            reply_json(res, res.status,
                       json(ApiError{res.status == 404 ? "validation" : "internal",
                                     res.status == 404 ? "no such endpoint" : "request failed"}));
            return httplib::Server::HandlerResponse::Handled;
        });

        server_.Post(
            "/v1/users/:u/sessions/:s/turns", guarded("turns", [this](const Request& req, Response& res) {
                auto user = req.path_params.at("u");
                auto session = req.path_params.at("s");
                json body = parse_body(req);
                if (!body.is_array()) throw validation_error("body must be an array of turn records");
                std::vector<DialogueTurn> turns;
                for (auto& item : body) {
                    json record = item;
                    if (!record.contains("session_id")) record["session_id"] = session;
                    DialogueTurn t = engine_->parse_ingest_record(record);
                    if (t.session_id != session)
                        throw validation_error("turn session_id does not match the path");
                    turns.push_back(std::move(t));
                }
                engine_->stage_turns(user, session, turns);
                reply_json(res, 200, json{{"staged", turns.size()},
                                          {"total", engine_->staged_turns(user, session).size()}});
            }));

        server_.Post("/v1/users/:u/sessions/:s/build",
                     guarded("build", [this](const Request& req, Response& res) {
                         auto report = engine_->build(req.path_params.at("u"),
                                                      req.path_params.at("s"));
                         reply_json(res, 200, json(report));
                     }));

        server_.Post("/v1/users/:u/query", guarded("query", [this](const Request& req, Response& res) {
            json body = parse_body(req);
            if (!body.contains("text") || !body["text"].is_string())
                throw validation_error("query requires a text field");
            std::string text = body["text"].get<std::string>();
            auto strategy = strategy_from_string(body.value("strategy", std::string{"hybrid"}));
            if (!strategy) throw validation_error("strategy must be hybrid or best_effort");
            int k = body.value("k", engine_->context().config.retrieval.k);
            bool include_answer = body.value("include_answer", false);
            auto result = engine_->query(req.path_params.at("u"), text, *strategy, k, include_answer);
            reply_json(res, 200, json(result));
        }));

        server_.Get("/v1/users/:u/notes", guarded("notes", [this](const Request& req, Response& res) {
            std::string status = req.get_param_value("status");
            std::optional<NoteStatus> filter = NoteStatus::active;
            if (status == "all") filter = std::nullopt;
            else if (status == "tombstoned") filter = NoteStatus::tombstoned;
            else if (!status.empty() && status != "active")
                throw validation_error("status must be active, tombstoned, or all");
            reply_json(res, 200, json{{"notes", engine_->notes(req.path_params.at("u"), filter)}});
        }));

        server_.Get("/v1/users/:u/episodes", guarded("episodes", [this](const Request& req, Response& res) {
            reply_json(res, 200, json{{"episodes", engine_->episodes(req.path_params.at("u"))}});
        }));

        // episodes are immutable; give mutation attempts their typed rejection
        auto reject_mutation = guarded("episode_mutation", [this](const Request& req, Response&) {
            engine_->episode_store().update_episode(req.path_params.at("id"));
        });
        server_.Put("/v1/users/:u/episodes/:id", reject_mutation);
        server_.Patch("/v1/users/:u/episodes/:id", reject_mutation);
        server_.Delete("/v1/users/:u/episodes/:id", reject_mutation);

        server_.Get("/v1/users/:u/ops", guarded("ops", [this](const Request& req, Response& res) {
            reply_json(res, 200, json{{"ops", engine_->ops(req.path_params.at("u"))}});
        }));

        server_.Post("/v1/users/:u/maintenance/forget",
                     guarded("forget", [this](const Request& req, Response& res) {
                         json body = parse_body(req);
                         ForgettingPolicy policy;
                         policy.min_usage = body.value("min_usage", std::int64_t{0});
                         double days = body.value("min_age_days", 0.0);
                         if (days < 0) throw validation_error("min_age_days must be >= 0");
                         policy.min_age =
                             std::chrono::seconds{static_cast<std::int64_t>(days * 86400.0)};
                         auto ids = engine_->forget(req.path_params.at("u"), policy);
                         reply_json(res, 200, json{{"tombstoned", ids}});
                     }));

        server_.Get("/health", guarded("health", [](const Request&, Response& res) {
            reply_json(res, 200, json{{"status", "ok"}});
        }));

        server_.Get("/metrics", guarded("metrics", [this](const Request&, Response& res) {
            res.status = 200;
            res.set_content(metrics_text(), "text/plain; version=0.0.4");
        }));
    }

    std::string metrics_text() const {
        const EngineMetrics& m = const_cast<MemoryEngine&>(*engine_).metrics();
        std::string out;
        char line[160];
        {
            std::lock_guard<std::mutex> lock(counter_mutex_);
            for (const auto& [name, count] : endpoint_counters_) {
                std::snprintf(line, sizeof(line), "engram_requests_total{endpoint=\"%s\"} %lld\n",
                              name.c_str(), static_cast<long long>(count));
                out += line;
            }
            std::snprintf(line, sizeof(line), "engram_requests_served_total %lld\n",
                          static_cast<long long>(total_requests_));
            out += line;
        }
        auto emit = [&](const char* name, std::int64_t v) {
            std::snprintf(line, sizeof(line), "%s %lld\n", name, static_cast<long long>(v));
            out += line;
        };
        emit("engram_queries_total", m.queries_total.load());
        emit("engram_queries_unanswerable_total", m.queries_unanswerable.load());
        emit("engram_triggers_total", m.triggers_total.load());
        emit("engram_ops_total{kind=\"ADD\"}", m.ops_add.load());
        emit("engram_ops_total{kind=\"UPDATE\"}", m.ops_update.load());
        emit("engram_ops_total{kind=\"DELETE\"}", m.ops_delete.load());
        LlmUsage usage = engine_->context().provider->total();
        emit("engram_llm_prompt_tokens_total", usage.prompt_tokens);
        emit("engram_llm_completion_tokens_total", usage.completion_tokens);
        std::int64_t cumulative = 0;
        for (std::size_t i = 0; i < EngineMetrics::kLatencyBucketsMs.size(); ++i) {
            cumulative += m.latency_buckets[i].load();
            std::snprintf(line, sizeof(line),
                          "engram_retrieval_latency_ms_bucket{le=\"%g\"} %lld\n",
                          EngineMetrics::kLatencyBucketsMs[i], static_cast<long long>(cumulative));
            out += line;
        }
        cumulative += m.latency_buckets[EngineMetrics::kLatencyBucketsMs.size()].load();
        std::snprintf(line, sizeof(line), "engram_retrieval_latency_ms_bucket{le=\"+Inf\"} %lld\n",
                      static_cast<long long>(cumulative));
        out += line;
        std::snprintf(line, sizeof(line), "engram_retrieval_latency_ms_sum %.6f\n",
                      m.latency_sum_ms.load());
        out += line;
        std::snprintf(line, sizeof(line), "engram_retrieval_latency_ms_count %lld\n",
                      static_cast<long long>(m.latency_count.load()));
        out += line;
        return out;
    }

    std::shared_ptr<MemoryEngine> engine_;
    ServiceConfig config_;
    httplib::Server server_;
    std::thread thread_;
    int bound_port_ = -1;

    mutable std::mutex counter_mutex_;
    std::int64_t total_requests_ = 0;
    std::map<std::string, std::int64_t> endpoint_counters_;
};

} // namespace engram
