#pragma once

// MemoryEngine: one storage directory, one provider, one embedder. Ingested
// turns are staged per (user, session) under <storage>/sessions/ until a
// build consumes them; queries run retrieval and, synchronously by default,
// any reconsolidation trigger they produce. Builds and reconsolidations are
// serialized per user; reads run concurrently.

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "engram/construction.hpp"
#include "engram/context.hpp"
#include "engram/evolution.hpp"
#include "engram/retrieval.hpp"
#include "engram/stores.hpp"

namespace engram {

struct QueryResult {
    EvidenceBundle bundle;
    std::optional<std::string> answer;
    bool trigger_fired = false;
    std::vector<MemoryOp> reconsolidation_ops;
};

inline void to_json(json& j, const QueryResult& r) {
    j = json{{"bundle", r.bundle}, {"trigger_fired", r.trigger_fired}};
    if (r.answer) j["answer"] = *r.answer;
    json ops = json::array();
    for (const auto& op : r.reconsolidation_ops) ops.push_back(json(op));
    j["reconsolidation_ops"] = ops;
}

// Retrieval latency histogram plus engine-level counters; the service layer
// renders these in text exposition format.
struct EngineMetrics {
    static constexpr std::array<double, 9> kLatencyBucketsMs = {0.1, 0.5, 1, 5, 10, 50, 100, 500, 1000};

    std::atomic<std::int64_t> queries_total{0};
    std::atomic<std::int64_t> queries_unanswerable{0};
    std::atomic<std::int64_t> triggers_total{0};
    std::atomic<std::int64_t> ops_add{0};
    std::atomic<std::int64_t> ops_update{0};
    std::atomic<std::int64_t> ops_delete{0};
    std::array<std::atomic<std::int64_t>, kLatencyBucketsMs.size() + 1> latency_buckets{};
    std::atomic<std::int64_t> latency_count{0};
    std::atomic<double> latency_sum_ms{0.0};

    void observe_latency(std::chrono::microseconds us) {
        double ms = static_cast<double>(us.count()) / 1000.0;
        std::size_t b = 0;
        while (b < kLatencyBucketsMs.size() && ms > kLatencyBucketsMs[b]) ++b;
        latency_buckets[b].fetch_add(1);
        latency_count.fetch_add(1);
        double cur = latency_sum_ms.load();
        while (!latency_sum_ms.compare_exchange_weak(cur, cur + ms)) {
        }
    }

    void count_ops(const std::vector<MemoryOp>& ops) {
        for (const auto& op : ops) {
            switch (op.kind) {
                case OpKind::add: ops_add.fetch_add(1); break;
                case OpKind::update: ops_update.fetch_add(1); break;
                case OpKind::del: ops_delete.fetch_add(1); break;
            }
        }
    }
};

class MemoryEngine {
public:
    explicit MemoryEngine(EngineContext ctx)
        : ctx_(std::move(ctx)),
          episodes_(storage_dir(), ctx_.config.retrieval.fusion_vector_weight,
                    ctx_.config.retrieval.fusion_lexical_weight),
          notes_(storage_dir(), ctx_.embedder) {
        if (!storage_dir().empty())
            std::filesystem::create_directories(std::filesystem::path(storage_dir()) / "sessions");
        load_staged();
    }

    const EngineContext& context() const { return ctx_; }
    EpisodeStore& episode_store() { return episodes_; }
    NoteStore& note_store() { return notes_; }
    EngineMetrics& metrics() { return metrics_; }

    // ------------------------------------------------------------------
    // Ingest and staging

    // One ingest record: {"session_id", "session_timestamp", "turn_index",
    // "speaker", "text"} with an optional per-turn "timestamp" override.
    DialogueTurn parse_ingest_record(const json& j) const {
        DialogueTurn t;
        t.session_id = j.at("session_id").get<std::string>();
        t.turn_index = j.at("turn_index").get<int>();
        t.speaker = j.at("speaker").get<std::string>();
        t.text = j.at("text").get<std::string>();
        std::string session_ts = j.value("session_timestamp", std::string{});
        std::string turn_ts = j.value("timestamp", std::string{});
        if (!turn_ts.empty()) {
            auto parsed = parse_instant(turn_ts);
            if (!parsed) throw validation_error("bad turn timestamp: " + turn_ts);
            t.timestamp = *parsed;
        } else if (!session_ts.empty()) {
            auto parsed = parse_instant(session_ts);
            if (!parsed) throw validation_error("bad session_timestamp: " + session_ts);
            t.timestamp = *parsed;  // missing turn timestamps inherit the session instant
        }
        t.validate();
        return t;
    }

    void stage_turns(const std::string& user_id, const std::string& session_id,
                     const std::vector<DialogueTurn>& turns) {
        if (turns.empty()) throw validation_error("no turns to stage");
        std::lock_guard<std::mutex> lock(staging_mutex_);
        auto& staged = staged_[staging_key(user_id, session_id)];
        RecordAppender* appender = nullptr;
        RecordAppender file;
        if (!storage_dir().empty()) {
            std::string path = staging_path(user_id, session_id);
            bool fresh = !std::filesystem::exists(path);
            file.open(path);
            if (fresh)
                file.append("staging_header", {{"user_id", user_id}, {"session_id", session_id}});
            appender = &file;
        }
        for (auto t : turns) {
            t.validate();
            if (t.session_id.empty()) t.session_id = session_id;
            if (t.session_id != session_id)
                throw validation_error("turn session_id mismatch: " + t.session_id);
            if (appender) appender->append("turn", json(t));
            staged.push_back(std::move(t));
        }
    }

    std::vector<DialogueTurn> staged_turns(const std::string& user_id,
                                           const std::string& session_id) const {
        std::lock_guard<std::mutex> lock(staging_mutex_);
        auto it = staged_.find(staging_key(user_id, session_id));
        if (it == staged_.end()) return {};
        return it->second;
    }

    std::vector<std::string> staged_sessions(const std::string& user_id) const {
        std::lock_guard<std::mutex> lock(staging_mutex_);
        std::vector<std::string> out;
        std::string prefix = user_id + "\x1f";
        for (const auto& [key, turns] : staged_)
            if (key.rfind(prefix, 0) == 0) out.push_back(key.substr(prefix.size()));
        return out;
    }

    // ------------------------------------------------------------------
    // Build

    BuildReport build(const std::string& user_id, const std::string& session_id) {
        auto turns = staged_turns(user_id, session_id);
        if (turns.empty())
            throw validation_error("no staged turns for session " + session_id +
                                   "; ingest first");
        std::sort(turns.begin(), turns.end(),
                  [](const DialogueTurn& a, const DialogueTurn& b) {
                      return a.turn_index < b.turn_index;
                  });
        return build_session(user_id, turns);
    }

    BuildReport build_session(const std::string& user_id, const std::vector<DialogueTurn>& turns) {
        auto lock = user_lock(user_id);
        auto report = build_memory(user_id, turns, ctx_, episodes_, notes_);
        metrics_.ops_add.fetch_add(static_cast<std::int64_t>(report.op_ids.size()));
        return report;
    }

    // ------------------------------------------------------------------
    // Query

    QueryResult query(const std::string& user_id, const std::string& text, Strategy strategy,
                      int k, bool with_answer = false) {
        QueryResult result;
        std::optional<ReconsolidationTrigger> trigger;
        if (strategy == Strategy::hybrid) {
            result.bundle = retrieve_hybrid(text, user_id, k, episodes_, notes_, ctx_);
        } else {
            auto [bundle, t] = retrieve_best_effort(text, user_id, k, episodes_, notes_, ctx_);
            result.bundle = std::move(bundle);
            trigger = std::move(t);
        }
        metrics_.queries_total.fetch_add(1);
        if (result.bundle.verdict == AnswerVerdict::unanswerable)
            metrics_.queries_unanswerable.fetch_add(1);
        metrics_.observe_latency(result.bundle.retrieval_latency);

        if (trigger) {
            result.trigger_fired = true;
            metrics_.triggers_total.fetch_add(1);
            if (ctx_.config.evolution.synchronous_triggers) {
                try {
                    auto lock = user_lock(user_id);
                    result.reconsolidation_ops = reconsolidate(*trigger, episodes_, notes_, ctx_);
                    metrics_.count_ops(result.reconsolidation_ops);
                } catch (const EngineError& e) {
                    log::warn("reconsolidation aborted: " + std::string{e.what()});
                }
            } else {
                std::lock_guard<std::mutex> lock(queue_mutex_);
                pending_triggers_.push_back(*trigger);
            }
        }
        if (with_answer) result.answer = generate_answer(text, result.bundle, ctx_);
        return result;
    }

    // Deferred-trigger mode: drains the queue, returns ops applied.
    std::vector<MemoryOp> process_pending_triggers() {
        std::vector<ReconsolidationTrigger> work;
        {
            std::lock_guard<std::mutex> lock(queue_mutex_);
            work.swap(pending_triggers_);
        }
        std::vector<MemoryOp> all;
        for (const auto& trigger : work) {
            auto lock = user_lock(trigger.user_id());
            auto ops = reconsolidate(trigger, episodes_, notes_, ctx_);
            metrics_.count_ops(ops);
            all.insert(all.end(), ops.begin(), ops.end());
        }
        return all;
    }

    // ------------------------------------------------------------------
    // Inspection and maintenance

    std::vector<Note> notes(const std::string& user_id,
                            std::optional<NoteStatus> status = NoteStatus::active) const {
        return notes_.for_user(user_id, status);
    }

    std::vector<Episode> episodes(const std::string& user_id) const {
        return episodes_.for_user(user_id);
    }

    std::vector<MemoryOp> ops(const std::string& user_id) const {
        return notes_.ops_for_user(user_id);
    }

    std::vector<std::string> forget(const std::string& user_id, const ForgettingPolicy& policy) {
        auto lock = user_lock(user_id);
        auto ids = run_forgetting(policy, user_id, notes_, ctx_);
        metrics_.ops_delete.fetch_add(static_cast<std::int64_t>(ids.size()));
        return ids;
    }

    void flush() { notes_.flush(); }

private:
    std::string storage_dir() const { return ctx_.config.storage_path; }

    static std::string staging_key(const std::string& user, const std::string& session) {
        return user + "\x1f" + session;
    }

    static std::string sanitize(const std::string& s) {
        std::string out;
        for (char c : s)
            out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'
                              ? c
                              : '_');
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "-%08llx",
                      static_cast<unsigned long long>(detail::fnv1a64(s) & 0xffffffffull));
        return out + suffix;
    }

    std::string staging_path(const std::string& user, const std::string& session) const {
        return (std::filesystem::path(storage_dir()) / "sessions" /
                (sanitize(user) + "__" + sanitize(session) + ".jsonl"))
            .string();
    }

    void load_staged() {
        if (storage_dir().empty()) return;
        auto dir = std::filesystem::path(storage_dir()) / "sessions";
        if (!std::filesystem::exists(dir)) return;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().extension() != ".jsonl") continue;
            std::string user, session;
            std::vector<DialogueTurn> turns;
            read_records(entry.path().string(), [&](const Record& r) {
                if (r.record_type == "staging_header") {
                    user = r.payload.value("user_id", std::string{});
                    session = r.payload.value("session_id", std::string{});
                } else if (r.record_type == "turn") {
                    turns.push_back(r.payload.get<DialogueTurn>());
                }
            });
            if (user.empty() || turns.empty()) continue;
            staged_[staging_key(user, session)] = std::move(turns);
        }
    }

    std::unique_lock<std::mutex> user_lock(const std::string& user_id) {
        std::mutex* m;
        {
            std::lock_guard<std::mutex> lock(user_mutexes_guard_);
            m = &user_mutexes_[user_id];
        }
        return std::unique_lock<std::mutex>(*m);
    }

    EngineContext ctx_;
    EpisodeStore episodes_;
    NoteStore notes_;
    EngineMetrics metrics_;

    mutable std::mutex staging_mutex_;
    std::map<std::string, std::vector<DialogueTurn>> staged_;

    std::mutex user_mutexes_guard_;
    std::map<std::string, std::mutex> user_mutexes_;

    std::mutex queue_mutex_;
    std::vector<ReconsolidationTrigger> pending_triggers_;
};

} // namespace engram
