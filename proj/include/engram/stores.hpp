#pragma once

// Episode store: append-only, immutable records with fused vector+lexical
// search. Note store: mutable exclusively through MemoryOps, with the op
// appended to its log before any state change becomes visible. Both persist
// as line-delimited records (episodes.log, notes.snapshot + ops.log); note
// snapshots are cut every 256 ops to bound recovery time.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "engram/embedding.hpp"
#include "engram/errors.hpp"
#include "engram/logging.hpp"
#include "engram/record_io.hpp"
#include "engram/text.hpp"
#include "engram/types.hpp"

namespace engram {

enum class MemoryLayer { note, episode };

inline const char* to_string(MemoryLayer l) { return l == MemoryLayer::note ? "note" : "episode"; }

struct ScoredHit {
    std::string item_id;
    MemoryLayer layer = MemoryLayer::note;
    double score = 0.0;
    std::string snippet;
};

inline void to_json(json& j, const ScoredHit& h) {
    j = json{{"item_id", h.item_id},
             {"layer", to_string(h.layer)},
             {"score", h.score},
             {"snippet", h.snippet}};
}

namespace detail {
// Shared ranking rule: score descending, item_id ascending on ties. The
// brute-force oracle in the tests applies the same rule verbatim.
inline void sort_hits(std::vector<ScoredHit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
}
} // namespace detail

// ---------------------------------------------------------------------------
// EpisodeStore

class EpisodeStore {
public:
    // An empty dir keeps the store purely in memory.
    explicit EpisodeStore(std::string dir = {},
                          double fusion_vector_weight = 0.7,
                          double fusion_lexical_weight = 0.3)
        : dir_(std::move(dir)),
          vector_weight_(fusion_vector_weight),
          lexical_weight_(fusion_lexical_weight) {
        if (!dir_.empty()) {
            std::filesystem::create_directories(dir_);
            read_records(log_path(), [this](const Record& r) {
                if (r.record_type != "episode") throw io_error("unexpected record in episodes.log");
                index_locked(r.payload.get<Episode>());
            });
            appender_.open(log_path());
        }
    }

    std::string append(const Episode& episode) {
        episode.validate();
        std::unique_lock lock(mutex_);
        if (by_id_.count(episode.episode_id))
            throw conflict_error("episode id already stored: " + episode.episode_id);
        // same-session episodes must stay pairwise disjoint in turn_index
        auto key = session_key(episode.user_id, episode.session_id);
        for (const auto& id : by_session_[key]) {
            const Episode& other = by_id_.at(id);
            bool disjoint = episode.last_turn_index() < other.first_turn_index() ||
                            other.last_turn_index() < episode.first_turn_index();
            if (!disjoint)
                throw conflict_error("episode overlaps stored turn range in session " +
                                     episode.session_id);
        }
        if (!dir_.empty()) appender_.append("episode", json(episode));
        index_locked(episode);
        return episode.episode_id;
    }

    // Episodes are immutable once appended. This is the single chokepoint
    // that turns any mutation attempt into a typed rejection.
    [[noreturn]] void update_episode(const std::string& episode_id) {
        {
            std::shared_lock lock(mutex_);
            if (!by_id_.count(episode_id))
                throw validation_error("unknown episode: " + episode_id);
        }
        throw immutability_error("episodes are immutable: " + episode_id);
    }

    std::optional<Episode> get(const std::string& episode_id) const {
        std::shared_lock lock(mutex_);
        auto it = by_id_.find(episode_id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<Episode> for_user(const std::string& user_id) const {
        std::shared_lock lock(mutex_);
        std::vector<Episode> out;
        auto it = by_user_.find(user_id);
        if (it == by_user_.end()) return out;
        for (const auto& id : it->second) out.push_back(by_id_.at(id));
        return out;
    }

    // Sorted [first,last] turn ranges already stored for a session.
    std::vector<std::pair<int, int>> session_ranges(const std::string& user_id,
                                                    const std::string& session_id) const {
        std::shared_lock lock(mutex_);
        std::vector<std::pair<int, int>> out;
        auto it = by_session_.find(session_key(user_id, session_id));
        if (it == by_session_.end()) return out;
        for (const auto& id : it->second) {
            const Episode& e = by_id_.at(id);
            out.emplace_back(e.first_turn_index(), e.last_turn_index());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::optional<std::string> episode_at(const std::string& user_id, const std::string& session_id,
                                          int first_turn_index) const {
        std::shared_lock lock(mutex_);
        auto it = by_session_.find(session_key(user_id, session_id));
        if (it == by_session_.end()) return std::nullopt;
        for (const auto& id : it->second)
            if (by_id_.at(id).first_turn_index() == first_turn_index) return id;
        return std::nullopt;
    }

    // Fused ranking: vector_weight * max(0, cosine) + lexical_weight *
    // term-frequency overlap, both in [0,1].
    std::vector<ScoredHit> search(const std::string& query_text, const EmbeddingVector& query_vec,
                                  int k, const std::string& user_id) const {
        if (k < 1) throw validation_error("search k must be >= 1");
        search_count_.fetch_add(1);
        std::shared_lock lock(mutex_);
        std::vector<ScoredHit> hits;
        auto it = by_user_.find(user_id);
        if (it == by_user_.end()) return hits;
        for (const auto& id : it->second) {
            const Episode& e = by_id_.at(id);
            double cos = std::max(0.0, cosine(query_vec, e.embedding));
            double lex = lexical_overlap(query_text, tf_cache_.at(id));
            ScoredHit h;
            h.item_id = id;
            h.layer = MemoryLayer::episode;
            h.score = vector_weight_ * cos + lexical_weight_ * lex;
            h.snippet = e.topic + ": " + e.topic_summary + " | " + e.joined_text();
            hits.push_back(std::move(h));
        }
        detail::sort_hits(hits);
        if (hits.size() > static_cast<std::size_t>(k)) hits.resize(static_cast<std::size_t>(k));
        return hits;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return by_id_.size();
    }

    std::int64_t search_count() const { return search_count_.load(); }

    static std::string searchable_text(const Episode& e) {
        return e.topic + " " + e.topic_summary + " " + e.joined_text();
    }

private:
    static std::string session_key(const std::string& user, const std::string& session) {
        return user + "\x1f" + session;
    }

    std::string log_path() const { return (std::filesystem::path(dir_) / "episodes.log").string(); }

    void index_locked(Episode e) {
        tf_cache_[e.episode_id] = term_frequencies(searchable_text(e));
        by_user_[e.user_id].push_back(e.episode_id);
        by_session_[session_key(e.user_id, e.session_id)].push_back(e.episode_id);
        by_id_.emplace(e.episode_id, std::move(e));
    }

    std::string dir_;
    double vector_weight_;
    double lexical_weight_;
    RecordAppender appender_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Episode> by_id_;
    std::unordered_map<std::string, std::vector<std::string>> by_user_;
    std::unordered_map<std::string, std::vector<std::string>> by_session_;
    std::unordered_map<std::string, std::unordered_map<std::string, int>> tf_cache_;
    mutable std::atomic<std::int64_t> search_count_{0};
};

// ---------------------------------------------------------------------------
// NoteStore

class NoteStore {
public:
    static constexpr int kSnapshotEvery = 256;

    explicit NoteStore(std::string dir, EmbedderPtr embedder)
        : dir_(std::move(dir)), embedder_(std::move(embedder)) {
        if (!dir_.empty()) {
            std::filesystem::create_directories(dir_);
            recover();
            appender_.open(ops_path());
        }
    }

    ~NoteStore() {
        try {
            flush();
        } catch (...) {
            // a failed final snapshot loses usage counters only; ops are already durable
        }
    }

    // Validates, appends to the op log, then applies. Returns the resulting
    // note state (for DELETE: the tombstoned note).
    Note apply_op(const MemoryOp& op) {
        auto applied = apply_ops({op});
        return applied.front();
    }

    // All-or-nothing batch: every op is validated against a staged view
    // before any log line is written, so a rejected op leaves no trace.
    std::vector<Note> apply_ops(const std::vector<MemoryOp>& ops) {
        if (ops.empty()) return {};
        std::unique_lock lock(mutex_);
        // stage
        std::map<std::string, Note> staged;
        for (const auto& op : ops) {
            op.validate();
            validate_against(op, staged);
            stage_op(op, staged);
        }
        // log, then mutate
        if (!dir_.empty())
            for (const auto& op : ops) appender_.append("op", json(op));
        std::vector<Note> results;
        for (const auto& op : ops) {
            apply_to_state(op);
            ops_.push_back(op);
            ops_by_user_[op.user_id].push_back(ops_.size() - 1);
            results.push_back(by_id_.at(op.target_note_ids.front()));
        }
        ops_since_snapshot_ += static_cast<int>(ops.size());
        if (!dir_.empty() && ops_since_snapshot_ >= kSnapshotEvery) snapshot_locked();
        return results;
    }

    std::optional<Note> get(const std::string& note_id) const {
        std::shared_lock lock(mutex_);
        auto it = by_id_.find(note_id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<Note> for_user(const std::string& user_id,
                               std::optional<NoteStatus> status = NoteStatus::active) const {
        std::shared_lock lock(mutex_);
        std::vector<Note> out;
        auto it = by_user_.find(user_id);
        if (it == by_user_.end()) return out;
        for (const auto& id : it->second) {
            const Note& n = by_id_.at(id);
            if (!status || n.status == *status) out.push_back(n);
        }
        return out;
    }

    // Pure vector search over the user's active notes; tombstoned notes are
    // never returned.
    std::vector<ScoredHit> search(const EmbeddingVector& query_vec, int k,
                                  const std::string& user_id) const {
        if (k < 1) throw validation_error("search k must be >= 1");
        search_count_.fetch_add(1);
        std::shared_lock lock(mutex_);
        std::vector<ScoredHit> hits;
        auto it = by_user_.find(user_id);
        if (it == by_user_.end()) return hits;
        for (const auto& id : it->second) {
            const Note& n = by_id_.at(id);
            if (n.status != NoteStatus::active) continue;
            ScoredHit h;
            h.item_id = id;
            h.layer = MemoryLayer::note;
            h.score = cosine(query_vec, n.embedding);
            h.snippet = n.content;
            hits.push_back(std::move(h));
        }
        detail::sort_hits(hits);
        if (hits.size() > static_cast<std::size_t>(k)) hits.resize(static_cast<std::size_t>(k));
        return hits;
    }

    // +1 per retrieval in which the note appeared in the final evidence.
    void record_usage(const std::vector<std::string>& note_ids) {
        std::unique_lock lock(mutex_);
        for (const auto& id : note_ids) {
            auto it = by_id_.find(id);
            if (it == by_id_.end()) {
                log::warn("record_usage: unknown note " + id);
                continue;
            }
            if (it->second.status != NoteStatus::active) {
                log::warn("record_usage: tombstoned note " + id);
                continue;
            }
            ++it->second.usage_count;
        }
    }

    std::vector<MemoryOp> ops_for_user(const std::string& user_id) const {
        std::shared_lock lock(mutex_);
        std::vector<MemoryOp> out;
        auto it = ops_by_user_.find(user_id);
        if (it == ops_by_user_.end()) return out;
        for (auto idx : it->second) out.push_back(ops_[idx]);
        return out;
    }

    std::vector<MemoryOp> all_ops() const {
        std::shared_lock lock(mutex_);
        return ops_;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return by_id_.size();
    }

    std::int64_t search_count() const { return search_count_.load(); }

    // Writes a fresh snapshot (captures usage counters, which are telemetry
    // and not part of the op log).
    void flush() {
        std::unique_lock lock(mutex_);
        if (!dir_.empty()) snapshot_locked();
    }

    // Replays an op sequence against an empty state using the same
    // transition function the live store uses.
    static std::map<std::string, Note> replay(const std::vector<MemoryOp>& ops,
                                              Embedder& embedder) {
        std::map<std::string, Note> state;
        for (const auto& op : ops) {
            op.validate();
            transition(state, op, embedder);
        }
        return state;
    }

    // Canonical serialization of a note state map for equality checks.
    static std::string serialize_state(const std::map<std::string, Note>& state) {
        std::string out;
        for (const auto& [id, note] : state) {
            out += encode_record("note", json(note));
            out.push_back('\n');
        }
        return out;
    }

    std::map<std::string, Note> state_map() const {
        std::shared_lock lock(mutex_);
        return by_id_;
    }

private:
    std::string ops_path() const { return (std::filesystem::path(dir_) / "ops.log").string(); }
    std::string snapshot_path() const {
        return (std::filesystem::path(dir_) / "notes.snapshot").string();
    }

    // The single state-transition function: live application, batch staging,
    // recovery replay, and the test oracle all route through here.
    static void transition(std::map<std::string, Note>& state, const MemoryOp& op,
                           Embedder& embedder) {
        const std::string& target = op.target_note_ids.front();
        switch (op.kind) {
            case OpKind::add: {
                Note n;
                n.note_id = target;
                n.user_id = op.user_id;
                n.content = *op.new_content;
                n.category = *op.category;
                n.status = NoteStatus::active;
                n.provenance = op.supporting_episode_ids;
                n.created_at = n.updated_at = op.applied_at;
                n.revision = 1;
                n.embedding = embedder.embed(n.content);
                n.validate();
                state.emplace(target, std::move(n));
                break;
            }
            case OpKind::update: {
                Note& n = state.at(target);
                n.content = *op.new_content;
                n.embedding = embedder.embed(n.content);
                n.revision += 1;
                n.updated_at = op.applied_at;
                for (const auto& ep : op.supporting_episode_ids)
                    if (std::find(n.provenance.begin(), n.provenance.end(), ep) == n.provenance.end())
                        n.provenance.push_back(ep);
                break;
            }
            case OpKind::del: {
                for (const auto& id : op.target_note_ids) {
                    Note& n = state.at(id);
                    n.status = NoteStatus::tombstoned;
                    n.updated_at = op.applied_at;
                }
                break;
            }
        }
    }

    void validate_against(const MemoryOp& op, const std::map<std::string, Note>& staged) const {
        auto lookup = [&](const std::string& id) -> const Note* {
            auto s = staged.find(id);
            if (s != staged.end()) return &s->second;
            auto l = by_id_.find(id);
            return l == by_id_.end() ? nullptr : &l->second;
        };
        if (op.kind == OpKind::add) {
            if (lookup(op.target_note_ids.front()))
                throw conflict_error("ADD with existing note id: " + op.target_note_ids.front());
            if (op.supporting_episode_ids.empty())
                throw validation_error("ADD op needs supporting episodes for provenance");
        } else {
            for (const auto& id : op.target_note_ids) {
                const Note* n = lookup(id);
                if (!n) throw stale_target_error("op targets unknown note: " + id);
                if (n->status != NoteStatus::active)
                    throw stale_target_error("op targets tombstoned note: " + id);
            }
        }
    }

    void stage_op(const MemoryOp& op, std::map<std::string, Note>& staged) {
        // seed staged entries from live state so chained ops validate
        for (const auto& id : op.target_note_ids) {
            if (!staged.count(id)) {
                auto it = by_id_.find(id);
                if (it != by_id_.end()) staged.emplace(id, it->second);
            }
        }
        transition(staged, op, *embedder_);
    }

    void apply_to_state(const MemoryOp& op) {
        transition(by_id_, op, *embedder_);
        if (op.kind == OpKind::add) {
            by_user_[op.user_id].push_back(op.target_note_ids.front());
        }
    }

    void recover() {
        std::string last_op_id;
        if (std::filesystem::exists(snapshot_path())) {
            read_records(snapshot_path(), [&](const Record& r) {
                if (r.record_type == "snapshot_header") {
                    last_op_id = r.payload.value("last_op_id", std::string{});
                } else if (r.record_type == "note") {
                    Note n = r.payload.get<Note>();
                    by_user_[n.user_id].push_back(n.note_id);
                    by_id_.emplace(n.note_id, std::move(n));
                } else {
                    throw io_error("unexpected record in notes.snapshot");
                }
            });
        }
        read_records(ops_path(), [&](const Record& r) {
            if (r.record_type != "op") throw io_error("unexpected record in ops.log");
            MemoryOp op = r.payload.get<MemoryOp>();
            bool beyond_snapshot = last_op_id.empty() || op.op_id > last_op_id;
            if (beyond_snapshot) {
                op.validate();
                apply_to_state(op);
                ++ops_since_snapshot_;
            }
            ops_.push_back(op);
            ops_by_user_[op.user_id].push_back(ops_.size() - 1);
        });
    }

    void snapshot_locked() {
        std::string tmp = snapshot_path() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw io_error("cannot write snapshot: " + tmp);
            std::string last_op_id = ops_.empty() ? std::string{} : ops_.back().op_id;
            out << encode_record("snapshot_header",
                                 {{"last_op_id", last_op_id},
                                  {"note_count", by_id_.size()}})
                << "\n";
            for (const auto& [id, note] : by_id_) out << encode_record("note", json(note)) << "\n";
            out.flush();
            if (!out) throw io_error("snapshot write failed: " + tmp);
        }
        std::filesystem::rename(tmp, snapshot_path());
        ops_since_snapshot_ = 0;
    }

    std::string dir_;
    EmbedderPtr embedder_;
    RecordAppender appender_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Note> by_id_;
    std::unordered_map<std::string, std::vector<std::string>> by_user_;
    std::vector<MemoryOp> ops_;
    std::unordered_map<std::string, std::vector<std::size_t>> ops_by_user_;
    int ops_since_snapshot_ = 0;
    mutable std::atomic<std::int64_t> search_count_{0};
};

} // namespace engram
