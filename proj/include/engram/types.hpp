#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "engram/clock.hpp"
#include "engram/embedding.hpp"
#include "engram/errors.hpp"
#include "engram/text.hpp"

namespace engram {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enums

enum class BoundaryReason { topic_shift, surprise, both, session_start };
enum class NoteCategory { fact, preference, profile };
enum class NoteStatus { active, tombstoned };
enum class OpKind { add, update, del };
enum class RelationVerdict { independent, extendable, contradictory };

inline const char* to_string(BoundaryReason r) {
    switch (r) {
        case BoundaryReason::topic_shift: return "topic_shift";
        case BoundaryReason::surprise: return "surprise";
        case BoundaryReason::both: return "both";
        case BoundaryReason::session_start: return "session_start";
    }
    return "session_start";
}

inline const char* to_string(NoteCategory c) {
    switch (c) {
        case NoteCategory::fact: return "fact";
        case NoteCategory::preference: return "preference";
        case NoteCategory::profile: return "profile";
    }
    return "fact";
}

inline const char* to_string(NoteStatus s) {
    return s == NoteStatus::active ? "active" : "tombstoned";
}

inline const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::add: return "ADD";
        case OpKind::update: return "UPDATE";
        case OpKind::del: return "DELETE";
    }
    return "ADD";
}

inline const char* to_string(RelationVerdict v) {
    switch (v) {
        case RelationVerdict::independent: return "independent";
        case RelationVerdict::extendable: return "extendable";
        case RelationVerdict::contradictory: return "contradictory";
    }
    return "independent";
}

inline std::optional<BoundaryReason> boundary_reason_from_string(const std::string& s) {
    if (s == "topic_shift") return BoundaryReason::topic_shift;
    if (s == "surprise") return BoundaryReason::surprise;
    if (s == "both") return BoundaryReason::both;
    if (s == "session_start") return BoundaryReason::session_start;
    return std::nullopt;
}

inline std::optional<NoteCategory> note_category_from_string(const std::string& s) {
    if (s == "fact") return NoteCategory::fact;
    if (s == "preference") return NoteCategory::preference;
    if (s == "profile") return NoteCategory::profile;
    return std::nullopt;
}

inline std::optional<NoteStatus> note_status_from_string(const std::string& s) {
    if (s == "active") return NoteStatus::active;
    if (s == "tombstoned") return NoteStatus::tombstoned;
    return std::nullopt;
}

inline std::optional<OpKind> op_kind_from_string(const std::string& s) {
    if (s == "ADD") return OpKind::add;
    if (s == "UPDATE") return OpKind::update;
    if (s == "DELETE") return OpKind::del;
    return std::nullopt;
}

inline std::optional<RelationVerdict> relation_verdict_from_string(const std::string& s) {
    if (s == "independent") return RelationVerdict::independent;
    if (s == "extendable") return RelationVerdict::extendable;
    if (s == "contradictory") return RelationVerdict::contradictory;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// DialogueTurn

struct DialogueTurn {
    int turn_index = 0;
    std::string speaker;
    std::string text;
    std::optional<Instant> timestamp;  // UTC; absent turns inherit the session instant at ingest
    std::string session_id;

    void validate() const {
        if (turn_index < 0) throw validation_error("turn_index must be >= 0");
        if (trim(speaker).empty()) throw validation_error("speaker must be non-empty");
        if (trim(text).empty()) throw validation_error("turn text must be non-empty");
    }
};

// Validates uniqueness and contiguity-from-zero of a full session's turns.
inline void validate_session_turns(const std::vector<DialogueTurn>& turns) {
    if (turns.empty()) throw validation_error("session has no turns");
    for (std::size_t i = 0; i < turns.size(); ++i) {
        turns[i].validate();
        if (turns[i].turn_index != static_cast<int>(i))
            throw validation_error("turn_index values must be contiguous from 0 (gap at " +
                                   std::to_string(i) + ")");
        if (turns[i].session_id != turns[0].session_id)
            throw validation_error("all turns of a session must share session_id");
    }
}

inline void to_json(json& j, const DialogueTurn& t) {
    j = json{{"turn_index", t.turn_index},
             {"speaker", t.speaker},
             {"text", t.text},
             {"session_id", t.session_id}};
    if (t.timestamp) j["timestamp"] = format_instant(*t.timestamp);
}

inline void from_json(const json& j, DialogueTurn& t) {
    t.turn_index = j.at("turn_index").get<int>();
    t.speaker = j.at("speaker").get<std::string>();
    t.text = j.at("text").get<std::string>();
    t.session_id = j.value("session_id", std::string{});
    t.timestamp.reset();
    if (j.contains("timestamp")) {
        auto parsed = parse_instant(j.at("timestamp").get<std::string>());
        if (!parsed) throw validation_error("bad turn timestamp");
        t.timestamp = *parsed;
    }
}

// ---------------------------------------------------------------------------
// Episode: immutable once stored.

struct Episode {
    std::string episode_id;
    std::string user_id;
    std::string session_id;
    std::string topic;
    std::string topic_summary;
    std::vector<DialogueTurn> turns;
    Instant time_start{};
    Instant time_end{};
    BoundaryReason boundary_reason = BoundaryReason::session_start;
    EmbeddingVector embedding;
    std::map<std::string, std::string> metadata;

    int first_turn_index() const { return turns.empty() ? -1 : turns.front().turn_index; }
    int last_turn_index() const { return turns.empty() ? -1 : turns.back().turn_index; }

    std::string joined_text() const {
        std::string out;
        for (const auto& t : turns) {
            if (!out.empty()) out.push_back(' ');
            out += t.speaker;
            out += ": ";
            out += t.text;
        }
        return out;
    }

    void validate() const {
        if (episode_id.empty()) throw validation_error("episode_id missing");
        if (user_id.empty()) throw validation_error("episode user_id missing");
        if (turns.empty()) throw validation_error("episode has no turns");
        for (std::size_t i = 1; i < turns.size(); ++i) {
            if (turns[i].turn_index != turns[i - 1].turn_index + 1)
                throw validation_error("episode turn_index values must be consecutive");
        }
        if (time_end < time_start) throw validation_error("episode time_span inverted");
        if (!is_unit_norm(embedding)) throw validation_error("episode embedding must be unit norm");
    }
};

inline void to_json(json& j, const Episode& e) {
    j = json{{"episode_id", e.episode_id},
             {"user_id", e.user_id},
             {"session_id", e.session_id},
             {"topic", e.topic},
             {"topic_summary", e.topic_summary},
             {"turns", e.turns},
             {"time_start", format_instant(e.time_start)},
             {"time_end", format_instant(e.time_end)},
             {"boundary_reason", to_string(e.boundary_reason)},
             {"embedding", e.embedding},
             {"metadata", e.metadata}};
}

inline void from_json(const json& j, Episode& e) {
    e.episode_id = j.at("episode_id").get<std::string>();
    e.user_id = j.at("user_id").get<std::string>();
    e.session_id = j.at("session_id").get<std::string>();
    e.topic = j.at("topic").get<std::string>();
    e.topic_summary = j.at("topic_summary").get<std::string>();
    e.turns = j.at("turns").get<std::vector<DialogueTurn>>();
    auto ts = parse_instant(j.at("time_start").get<std::string>());
    auto te = parse_instant(j.at("time_end").get<std::string>());
    if (!ts || !te) throw validation_error("bad episode time_span");
    e.time_start = *ts;
    e.time_end = *te;
    auto br = boundary_reason_from_string(j.at("boundary_reason").get<std::string>());
    if (!br) throw validation_error("bad boundary_reason");
    e.boundary_reason = *br;
    e.embedding = j.at("embedding").get<EmbeddingVector>();
    e.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

// ---------------------------------------------------------------------------
// Note: mutable via ops only.

struct Note {
    std::string note_id;
    std::string user_id;
    std::string content;
    NoteCategory category = NoteCategory::fact;
    NoteStatus status = NoteStatus::active;
    std::vector<std::string> provenance;  // episode ids, non-empty
    Instant created_at{};
    Instant updated_at{};
    std::int64_t revision = 1;
    std::int64_t usage_count = 0;
    EmbeddingVector embedding;
    std::map<std::string, std::string> metadata;

    void validate() const {
        if (note_id.empty()) throw validation_error("note_id missing");
        if (user_id.empty()) throw validation_error("note user_id missing");
        if (trim(content).empty()) throw validation_error("note content must be non-empty");
        if (provenance.empty()) throw validation_error("note provenance must be non-empty");
        if (revision < 1) throw validation_error("note revision must be >= 1");
        if (usage_count < 0) throw validation_error("note usage_count must be >= 0");
        if (updated_at < created_at) throw validation_error("note updated_at < created_at");
        if (!is_unit_norm(embedding)) throw validation_error("note embedding must be unit norm");
    }
};

inline void to_json(json& j, const Note& n) {
    j = json{{"note_id", n.note_id},
             {"user_id", n.user_id},
             {"content", n.content},
             {"category", to_string(n.category)},
             {"status", to_string(n.status)},
             {"provenance", n.provenance},
             {"created_at", format_instant(n.created_at)},
             {"updated_at", format_instant(n.updated_at)},
             {"revision", n.revision},
             {"usage_count", n.usage_count},
             {"embedding", n.embedding},
             {"metadata", n.metadata}};
}

inline void from_json(const json& j, Note& n) {
    n.note_id = j.at("note_id").get<std::string>();
    n.user_id = j.at("user_id").get<std::string>();
    n.content = j.at("content").get<std::string>();
    auto cat = note_category_from_string(j.at("category").get<std::string>());
    auto st = note_status_from_string(j.at("status").get<std::string>());
    if (!cat) throw validation_error("bad note category");
    if (!st) throw validation_error("bad note status");
    n.category = *cat;
    n.status = *st;
    n.provenance = j.at("provenance").get<std::vector<std::string>>();
    auto ca = parse_instant(j.at("created_at").get<std::string>());
    auto ua = parse_instant(j.at("updated_at").get<std::string>());
    if (!ca || !ua) throw validation_error("bad note timestamps");
    n.created_at = *ca;
    n.updated_at = *ua;
    n.revision = j.at("revision").get<std::int64_t>();
    n.usage_count = j.value("usage_count", std::int64_t{0});
    n.embedding = j.at("embedding").get<EmbeddingVector>();
    n.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

// ---------------------------------------------------------------------------
// MemoryOp: the reconsolidation/audit record. The op log is append-only and
// totally ordered per user; replaying it against an empty note store must
// reproduce the active note set, so ADD ops carry content and category.

inline constexpr const char* kForgettingCause = "forgetting";

struct MemoryOp {
    std::string op_id;
    std::string user_id;
    OpKind kind = OpKind::add;
    std::vector<std::string> target_note_ids;
    std::optional<std::string> new_content;
    std::optional<NoteCategory> category;  // ADD only
    std::optional<RelationVerdict> relation_verdict;
    std::optional<std::string> trigger_query;
    std::vector<std::string> supporting_episode_ids;
    Instant applied_at{};
    std::string cause;  // empty, or "forgetting" for maintenance deletes

    void validate() const {
        if (op_id.empty()) throw validation_error("op_id missing");
        if (user_id.empty()) throw validation_error("op user_id missing");
        switch (kind) {
            case OpKind::add:
                if (target_note_ids.size() != 1)
                    throw validation_error("ADD op must name exactly the new note id");
                if (!new_content || trim(*new_content).empty())
                    throw validation_error("ADD op requires new_content");
                if (!category) throw validation_error("ADD op requires a category");
                if (relation_verdict && *relation_verdict == RelationVerdict::extendable)
                    throw validation_error("ADD op cannot carry an extendable verdict");
                break;
            case OpKind::update:
                if (target_note_ids.size() != 1)
                    throw validation_error("UPDATE op must target exactly one note");
                if (!relation_verdict || *relation_verdict != RelationVerdict::extendable)
                    throw validation_error("UPDATE op requires verdict=extendable");
                if (!new_content || trim(*new_content).empty())
                    throw validation_error("UPDATE op requires new_content");
                break;
            case OpKind::del:
                if (target_note_ids.empty())
                    throw validation_error("DELETE op must target a note");
                if (cause != kForgettingCause &&
                    (!relation_verdict || *relation_verdict != RelationVerdict::contradictory))
                    throw validation_error("DELETE op requires verdict=contradictory unless cause=forgetting");
                break;
        }
    }
};

inline void to_json(json& j, const MemoryOp& op) {
    j = json{{"op_id", op.op_id},
             {"user_id", op.user_id},
             {"kind", to_string(op.kind)},
             {"target_note_ids", op.target_note_ids},
             {"supporting_episode_ids", op.supporting_episode_ids},
             {"applied_at", format_instant(op.applied_at)}};
    if (op.new_content) j["new_content"] = *op.new_content;
    if (op.category) j["category"] = to_string(*op.category);
    if (op.relation_verdict) j["relation_verdict"] = to_string(*op.relation_verdict);
    if (op.trigger_query) j["trigger_query"] = *op.trigger_query;
    if (!op.cause.empty()) j["cause"] = op.cause;
}

inline void from_json(const json& j, MemoryOp& op) {
    op.op_id = j.at("op_id").get<std::string>();
    op.user_id = j.at("user_id").get<std::string>();
    auto kind = op_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw validation_error("bad op kind");
    op.kind = *kind;
    op.target_note_ids = j.at("target_note_ids").get<std::vector<std::string>>();
    op.supporting_episode_ids = j.value("supporting_episode_ids", std::vector<std::string>{});
    auto at = parse_instant(j.at("applied_at").get<std::string>());
    if (!at) throw validation_error("bad op applied_at");
    op.applied_at = *at;
    op.new_content.reset();
    op.category.reset();
    op.relation_verdict.reset();
    op.trigger_query.reset();
    if (j.contains("new_content")) op.new_content = j.at("new_content").get<std::string>();
    if (j.contains("category")) {
        auto cat = note_category_from_string(j.at("category").get<std::string>());
        if (!cat) throw validation_error("bad op category");
        op.category = *cat;
    }
    if (j.contains("relation_verdict")) {
        auto v = relation_verdict_from_string(j.at("relation_verdict").get<std::string>());
        if (!v) throw validation_error("bad relation_verdict");
        op.relation_verdict = *v;
    }
    if (j.contains("trigger_query")) op.trigger_query = j.at("trigger_query").get<std::string>();
    op.cause = j.value("cause", std::string{});
}

} // namespace engram
