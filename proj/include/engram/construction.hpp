#pragma once

// Memory construction: dual-channel segmentation into immutable episodes,
// three-stage knowledge extraction into notes, and the selective alignment
// policy (notes are fully aligned; episodes keep raw turn text unless
// construction.align_episodes is set).
//
// Scripted-provider resolution keys used here:
//   segment          -> session_id
//   extract_stage1/2 -> "<session_id>:<first_turn_index>" of the episode
//   normalize        -> the exact input text

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "engram/context.hpp"
#include "engram/schemas.hpp"
#include "engram/stores.hpp"
#include "engram/temporal.hpp"
#include "engram/types.hpp"

namespace engram {

// ---------------------------------------------------------------------------
// Segmentation result

struct SegmentBoundary {
    int turn_index = 0;
    BoundaryReason reason = BoundaryReason::session_start;
};

struct SegmentationResult {
    std::vector<SegmentBoundary> boundaries;  // strictly increasing, first is 0
    std::vector<SegmentLabel> labels;         // one per boundary
};

// Engine-side OR fusion of the two channels. The provider reports channels;
// the engine owns the rule, so it stays testable with any provider.
inline SegmentationResult fuse_channels(int session_length, const std::vector<int>& topic_channel,
                                        const std::vector<int>& surprise_channel) {
    if (session_length < 1) throw validation_error("session_length must be >= 1");
    auto keep = [session_length](int b) { return b >= 0 && b < session_length; };
    std::set<int> topic, surprise;
    for (int b : topic_channel)
        if (keep(b)) topic.insert(b);
    for (int b : surprise_channel)
        if (keep(b)) surprise.insert(b);

    std::set<int> fused{0};
    fused.insert(topic.begin(), topic.end());
    fused.insert(surprise.begin(), surprise.end());

    SegmentationResult r;
    for (int b : fused) {
        bool in_t = topic.count(b) > 0;
        bool in_s = surprise.count(b) > 0;
        BoundaryReason reason;
        if (in_t && in_s) reason = BoundaryReason::both;
        else if (in_t) reason = BoundaryReason::topic_shift;
        else if (in_s) reason = BoundaryReason::surprise;
        else reason = BoundaryReason::session_start;  // only b == 0 can be unflagged
        r.boundaries.push_back({b, reason});
    }
    return r;
}

// Fixed-window fallback when the provider cannot produce a segmentation.
inline SegmentationResult fallback_segmentation(int session_length, int window) {
    if (window < 1) window = 1;
    SegmentationResult r;
    for (int b = 0; b < session_length; b += window)
        r.boundaries.push_back({b, BoundaryReason::session_start});
    return r;
}

// ---------------------------------------------------------------------------
// Candidate knowledge (extraction stages 1 and 2)

enum class ConfidenceLabel { explicit_mention, implicit_inference };

inline const char* to_string(ConfidenceLabel c) {
    return c == ConfidenceLabel::explicit_mention ? "explicit" : "implicit";
}

struct CandidateKnowledge {
    std::string content;
    NoteCategory category = NoteCategory::fact;
    int stage = 1;
    ConfidenceLabel confidence_label = ConfidenceLabel::explicit_mention;
    std::vector<int> source_turn_indices;

    void validate() const {
        if (trim(content).empty()) throw validation_error("candidate content must be non-empty");
        if (stage == 1) {
            if (category != NoteCategory::fact ||
                confidence_label != ConfidenceLabel::explicit_mention)
                throw validation_error("stage-1 candidates are explicit facts");
        } else if (stage == 2) {
            if (category == NoteCategory::fact ||
                confidence_label != ConfidenceLabel::implicit_inference)
                throw validation_error("stage-2 candidates are implicit preferences/profiles");
        } else {
            throw validation_error("candidate stage must be 1 or 2");
        }
    }
};

// ---------------------------------------------------------------------------
// Alignment ops

// Entity-mention resolution through the provider; non-destructive by
// contract, so any failure returns the input verbatim.
inline std::string resolve_coreferences(const std::string& text, const std::string& episode_context,
                                        const std::string& speaker, const EngineContext& ctx) {
    try {
        auto resp = call_typed<NormalizeResponse>(
            *ctx.provider,
            ctx.request(TaskTag::normalize, build_normalize_prompt(text, speaker, episode_context),
                        text),
            parse_normalize_response);
        if (trim(resp.text).empty()) return text;
        return resp.text;
    } catch (const EngineError&) {
        return text;
    }
}

// ---------------------------------------------------------------------------
// Segmentation

namespace construction_detail {

inline std::string episode_key(const std::string& session_id, int first_turn_index) {
    return session_id + ":" + std::to_string(first_turn_index);
}

inline SegmentLabel synthesized_label(const std::vector<DialogueTurn>& turns, int begin,
                                      std::size_t index) {
    SegmentLabel label;
    label.topic = "segment-" + std::to_string(index);
    label.summary = truncate_tokens(turns[static_cast<std::size_t>(begin)].text, 24);
    return label;
}

} // namespace construction_detail

inline std::vector<Episode> segment_session(const std::string& user_id,
                                            const std::vector<DialogueTurn>& turns,
                                            const EngineContext& ctx) {
    validate_session_turns(turns);
    const std::string& session_id = turns.front().session_id;
    int n = static_cast<int>(turns.size());

    SegmentationResult seg;
    std::vector<SegmentLabel> provider_labels;
    try {
        auto resp = call_typed<SegmentResponse>(
            *ctx.provider,
            ctx.request(TaskTag::segment, build_segment_prompt(session_id, turns), session_id),
            parse_segment_response);
        seg = fuse_channels(n, resp.topic_boundaries, resp.surprise_boundaries);
        provider_labels = std::move(resp.labels);
    } catch (const LlmParseError& e) {
        log::warn("segmentation response unusable (" + std::string{e.what()} +
                  "); using fixed-window fallback");
        seg = fallback_segmentation(n, ctx.config.construction.fallback_window);
    } catch (const ProviderError& e) {
        log::warn("segmentation provider unavailable (" + std::string{e.what()} +
                  "); using fixed-window fallback");
        seg = fallback_segmentation(n, ctx.config.construction.fallback_window);
    }

    bool labels_usable = provider_labels.size() == seg.boundaries.size();
    std::vector<Episode> episodes;
    for (std::size_t s = 0; s < seg.boundaries.size(); ++s) {
        int begin = seg.boundaries[s].turn_index;
        int end = s + 1 < seg.boundaries.size() ? seg.boundaries[s + 1].turn_index : n;

        Episode e;
        e.episode_id = ctx.ids->next(EntityKind::episode);
        e.user_id = user_id;
        e.session_id = session_id;
        SegmentLabel label = labels_usable ? provider_labels[s]
                                           : construction_detail::synthesized_label(turns, begin, s);
        if (trim(label.topic).empty()) label.topic = "segment-" + std::to_string(s);
        if (trim(label.summary).empty())
            label.summary = truncate_tokens(turns[static_cast<std::size_t>(begin)].text, 24);
        e.topic = label.topic;
        e.topic_summary = label.summary;
        e.boundary_reason = seg.boundaries[s].reason;
        e.turns.assign(turns.begin() + begin, turns.begin() + end);
        if (ctx.config.construction.align_episodes) {
            for (auto& t : e.turns) {
                std::string aligned = resolve_coreferences(t.text, t.speaker + ": " + t.text,
                                                           t.speaker, ctx);
                t.text = t.timestamp ? normalize_temporal(aligned, *t.timestamp) : aligned;
            }
        }

        std::optional<Instant> start, finish;
        for (const auto& t : e.turns) {
            if (!t.timestamp) continue;
            if (!start || *t.timestamp < *start) start = *t.timestamp;
            if (!finish || *finish < *t.timestamp) finish = *t.timestamp;
        }
        e.time_start = start.value_or(ctx.clock->now());
        e.time_end = finish.value_or(e.time_start);

        std::string embed_text = truncate_tokens(
            e.topic + " " + e.topic_summary + " " + e.turns.front().text + " " +
                e.turns.back().text,
            ctx.config.construction.episode_embed_tokens);
        e.embedding = ctx.embedder->embed(embed_text);
        e.metadata = {{"source", "ingest"}, {"boundary_reason", to_string(e.boundary_reason)}};
        e.validate();
        episodes.push_back(std::move(e));
    }
    return episodes;
}

// ---------------------------------------------------------------------------
// Extraction stages

namespace construction_detail {

inline bool sources_in_range(const std::vector<int>& sources, const Episode& e) {
    return std::all_of(sources.begin(), sources.end(), [&](int idx) {
        return idx >= e.first_turn_index() && idx <= e.last_turn_index();
    });
}

} // namespace construction_detail

// Stage 1: independently interpretable factual units. Best-effort: a failed
// or unusable provider response yields an empty list, never an error.
inline std::vector<CandidateKnowledge> extract_stage1(const Episode& episode,
                                                      const EngineContext& ctx,
                                                      const std::string& key) {
    std::vector<CandidateKnowledge> out;
    ExtractResponse resp;
    try {
        resp = call_typed<ExtractResponse>(
            *ctx.provider,
            ctx.request(TaskTag::extract_stage1, build_extract_stage1_prompt(episode), key),
            parse_extract_response);
    } catch (const LlmParseError& e) {
        log::warn("stage-1 extraction failed for " + episode.episode_id + ": " + e.what());
        return out;
    } catch (const ProviderError& e) {
        log::warn("stage-1 extraction unavailable for " + episode.episode_id + ": " + e.what());
        return out;
    }
    for (auto& item : resp.items) {
        if (trim(item.content).empty()) continue;
        if (item.category != "fact") {
            log::warn("stage-1 item with non-fact category dropped");
            continue;
        }
        if (!construction_detail::sources_in_range(item.source_turn_indices, episode)) {
            log::warn("stage-1 item cites out-of-range turns; dropped");
            continue;
        }
        CandidateKnowledge c;
        c.content = trim(item.content);
        c.category = NoteCategory::fact;
        c.stage = 1;
        c.confidence_label = ConfidenceLabel::explicit_mention;
        c.source_turn_indices = item.source_turn_indices;
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<CandidateKnowledge> extract_stage1(const Episode& episode,
                                                      const EngineContext& ctx) {
    return extract_stage1(episode, ctx,
                          construction_detail::episode_key(episode.session_id,
                                                           episode.first_turn_index()));
}

// Stage 2: implicit preferences and profile traits. Anything the provider
// labels as a fact is dropped here; stage 2 must not introduce new facts.
inline std::vector<CandidateKnowledge> extract_stage2(const Episode& episode,
                                                      const std::vector<CandidateKnowledge>& stage1,
                                                      const EngineContext& ctx) {
    std::vector<CandidateKnowledge> out;
    std::vector<std::string> stage1_contents;
    for (const auto& c : stage1) stage1_contents.push_back(c.content);
    ExtractResponse resp;
    try {
        resp = call_typed<ExtractResponse>(
            *ctx.provider,
            ctx.request(TaskTag::extract_stage2,
                        build_extract_stage2_prompt(episode, stage1_contents),
                        construction_detail::episode_key(episode.session_id,
                                                         episode.first_turn_index())),
            parse_extract_response);
    } catch (const LlmParseError& e) {
        log::warn("stage-2 extraction failed for " + episode.episode_id + ": " + e.what());
        return out;
    } catch (const ProviderError& e) {
        log::warn("stage-2 extraction unavailable for " + episode.episode_id + ": " + e.what());
        return out;
    }
    for (auto& item : resp.items) {
        if (trim(item.content).empty()) continue;
        auto cat = note_category_from_string(item.category);
        if (!cat || *cat == NoteCategory::fact) continue;  // enforced, not just validated
        if (!construction_detail::sources_in_range(item.source_turn_indices, episode)) {
            log::warn("stage-2 item cites out-of-range turns; dropped");
            continue;
        }
        CandidateKnowledge c;
        c.content = trim(item.content);
        c.category = *cat;
        c.stage = 2;
        c.confidence_label = ConfidenceLabel::implicit_inference;
        c.source_turn_indices = item.source_turn_indices;
        out.push_back(std::move(c));
    }
    return out;
}

// Stage 3: non-destructive normalization. Coreference resolution and
// temporal grounding run first (both idempotent), then exact duplicates
// collapse and near-duplicates (cosine >= dedup_threshold) merge keeping the
// longer content. Nothing else is dropped.
inline std::vector<Note> extract_stage3_normalize(const std::vector<CandidateKnowledge>& candidates,
                                                  const Episode& episode, const EngineContext& ctx) {
    struct Normalized {
        std::string content;
        NoteCategory category;
        EmbeddingVector embedding;
    };

    std::string context_text = episode.joined_text();
    std::vector<Normalized> kept;
    for (const auto& raw : candidates) {
        raw.validate();
        std::string speaker = episode.turns.front().speaker;
        if (!raw.source_turn_indices.empty()) {
            int first_source = raw.source_turn_indices.front();
            for (const auto& t : episode.turns)
                if (t.turn_index == first_source) speaker = t.speaker;
        }
        std::string content = resolve_coreferences(raw.content, context_text, speaker, ctx);
        content = normalize_temporal(content, episode.time_start);
        content = trim(content);

        bool merged = false;
        for (auto& existing : kept) {
            if (existing.content == content) {
                merged = true;  // exact duplicate
                break;
            }
        }
        if (merged) continue;

        EmbeddingVector emb = ctx.embedder->embed(content);
        for (auto& existing : kept) {
            if (cosine(existing.embedding, emb) >= ctx.config.construction.dedup_threshold) {
                if (content.size() > existing.content.size()) {
                    existing.content = content;
                    existing.category = raw.category;
                    existing.embedding = std::move(emb);
                }
                merged = true;
                break;
            }
        }
        if (!merged) kept.push_back({std::move(content), raw.category, std::move(emb)});
    }

    std::vector<Note> notes;
    Instant now = ctx.clock->now();
    for (auto& k : kept) {
        Note n;
        n.note_id = ctx.ids->next(EntityKind::note);
        n.user_id = episode.user_id;
        n.content = std::move(k.content);
        n.category = k.category;
        n.status = NoteStatus::active;
        n.provenance = {episode.episode_id};
        n.created_at = n.updated_at = now;
        n.revision = 1;
        n.embedding = std::move(k.embedding);
        n.validate();
        notes.push_back(std::move(n));
    }
    return notes;
}

// ---------------------------------------------------------------------------
// Full build

struct BuildReport {
    std::string user_id;
    std::string session_id;
    std::vector<std::string> episode_ids;
    std::vector<std::string> note_ids;
    std::vector<std::string> op_ids;
    int episodes_reused = 0;  // resume of a partial build
};

inline void to_json(json& j, const BuildReport& r) {
    j = json{{"user_id", r.user_id},
             {"session_id", r.session_id},
             {"episode_ids", r.episode_ids},
             {"note_ids", r.note_ids},
             {"op_ids", r.op_ids},
             {"episodes_reused", r.episodes_reused}};
}

// Segments a session, appends its episodes, and records every extracted
// note through an ADD op. A session whose stored episodes already cover all
// turns is rejected as a duplicate; a partially built session (crash mid
// build) rolls forward, reusing stored episodes and extracting only for the
// fresh ones.
inline BuildReport build_memory(const std::string& user_id, const std::vector<DialogueTurn>& turns,
                                const EngineContext& ctx, EpisodeStore& episodes, NoteStore& notes) {
    validate_session_turns(turns);
    const std::string& session_id = turns.front().session_id;

    auto ranges = episodes.session_ranges(user_id, session_id);
    int covered = 0;
    for (const auto& [first, last] : ranges)
        if (first == covered) covered = last + 1;
    if (covered == static_cast<int>(turns.size()))
        throw conflict_error("session already built: " + session_id);

    BuildReport report;
    report.user_id = user_id;
    report.session_id = session_id;

    auto planned = segment_session(user_id, turns, ctx);
    for (auto& episode : planned) {
        if (auto existing = episodes.episode_at(user_id, session_id, episode.first_turn_index())) {
            report.episode_ids.push_back(*existing);
            ++report.episodes_reused;
            continue;
        }
        episodes.append(episode);
        report.episode_ids.push_back(episode.episode_id);

        auto stage1 = extract_stage1(episode, ctx);
        auto stage2 = extract_stage2(episode, stage1, ctx);
        std::vector<CandidateKnowledge> candidates = stage1;
        candidates.insert(candidates.end(), stage2.begin(), stage2.end());
        auto new_notes = extract_stage3_normalize(candidates, episode, ctx);

        std::vector<MemoryOp> ops;
        for (const auto& n : new_notes) {
            MemoryOp op;
            op.op_id = ctx.ids->next(EntityKind::op);
            op.user_id = user_id;
            op.kind = OpKind::add;
            op.target_note_ids = {n.note_id};
            op.new_content = n.content;
            op.category = n.category;
            op.supporting_episode_ids = {episode.episode_id};
            op.applied_at = ctx.clock->now();
            ops.push_back(std::move(op));
        }
        notes.apply_ops(ops);
        for (const auto& op : ops) {
            report.op_ids.push_back(op.op_id);
            report.note_ids.push_back(op.target_note_ids.front());
        }
    }
    return report;
}

} // namespace engram
