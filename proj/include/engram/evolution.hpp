#pragma once

// Memory self-evolution. A reconsolidation trigger (note layer insufficient,
// episode layer sufficient) drives query-conditioned extraction over the
// supporting episodes; each extracted candidate is classified against its
// nearest active notes as independent, extendable, or contradictory, and the
// verdicts map onto ADD, UPDATE, and DELETE+ADD. All ops of one trigger are
// applied atomically; a candidate whose classification cannot be trusted is
// skipped rather than guessed.
//
// Scripted-provider resolution keys:
//   extract_stage1 (query-conditioned) -> "recon:<query>"
//   classify_relation                  -> the candidate content

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engram/context.hpp"
#include "engram/retrieval.hpp"
#include "engram/schemas.hpp"
#include "engram/stores.hpp"

namespace engram {

struct RelationClassification {
    RelationVerdict verdict = RelationVerdict::independent;
    std::optional<std::string> target_note_id;  // required unless independent
    std::string rationale;
};

struct ForgettingPolicy {
    std::int64_t min_usage = 0;  // notes with usage_count below this are candidates
    Duration min_age{0};         // and only once older than this

    void validate() const {
        if (min_usage < 0) throw validation_error("min_usage must be >= 0");
        if (min_age < Duration::zero()) throw validation_error("min_age must be >= 0");
    }
};

namespace evolution_detail {

struct Candidate {
    std::string content;
    NoteCategory category = NoteCategory::fact;
};

inline std::vector<Candidate> extract_candidates(const ReconsolidationTrigger& trigger,
                                                 const std::vector<const Episode*>& episodes,
                                                 const EngineContext& ctx) {
    std::vector<Candidate> out;
    ExtractResponse resp;
    try {
        resp = call_typed<ExtractResponse>(
            *ctx.provider,
            ctx.request(TaskTag::extract_stage1,
                        build_query_extract_prompt(trigger.query(), episodes),
                        "recon:" + trigger.query()),
            parse_extract_response);
    } catch (const LlmParseError& e) {
        log::warn("query-conditioned extraction failed: " + std::string{e.what()});
        return out;
    } catch (const ProviderError& e) {
        log::warn("query-conditioned extraction unavailable: " + std::string{e.what()});
        return out;
    }
    for (auto& item : resp.items) {
        if (trim(item.content).empty()) continue;
        auto cat = note_category_from_string(item.category);
        if (!cat) {
            log::warn("reconsolidation candidate with bad category dropped");
            continue;
        }
        out.push_back({trim(item.content), *cat});
    }
    return out;
}

// Top-k active overlay notes by cosine, floor applied, ties by note_id.
inline std::vector<const Note*> nearest_notes(const std::map<std::string, Note>& overlay,
                                              const EmbeddingVector& vec, int k, double floor) {
    std::vector<std::pair<double, const Note*>> scored;
    for (const auto& [id, note] : overlay) {
        if (note.status != NoteStatus::active) continue;
        double c = cosine(vec, note.embedding);
        if (c >= floor) scored.emplace_back(c, &note);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->note_id < b.second->note_id;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    std::vector<const Note*> out;
    for (auto& [c, n] : scored) out.push_back(n);
    return out;
}

} // namespace evolution_detail

// Runs one reconsolidation transaction. Returns the ops applied (possibly
// empty when every candidate was skipped). Store failures abort the whole
// trigger with no partial application.
inline std::vector<MemoryOp> reconsolidate(const ReconsolidationTrigger& trigger,
                                           EpisodeStore& episodes, NoteStore& notes,
                                           const EngineContext& ctx) {
    std::vector<Episode> supporting;
    for (const auto& id : trigger.supporting_episode_ids()) {
        auto e = episodes.get(id);
        if (!e) throw validation_error("trigger references unknown episode: " + id);
        supporting.push_back(std::move(*e));
    }
    std::vector<const Episode*> episode_ptrs;
    for (const auto& e : supporting) episode_ptrs.push_back(&e);

    auto candidates = evolution_detail::extract_candidates(trigger, episode_ptrs, ctx);

    // Working overlay of the user's notes; later candidates see the ops
    // staged by earlier ones.
    std::map<std::string, Note> overlay;
    for (auto& n : notes.for_user(trigger.user_id(), std::nullopt)) overlay.emplace(n.note_id, n);

    std::vector<MemoryOp> ops;
    auto stage = [&](MemoryOp op) {
        op.validate();
        // mirror the store transition on the overlay
        switch (op.kind) {
            case OpKind::add: {
                Note n;
                n.note_id = op.target_note_ids.front();
                n.user_id = op.user_id;
                n.content = *op.new_content;
                n.category = *op.category;
                n.status = NoteStatus::active;
                n.provenance = op.supporting_episode_ids;
                n.created_at = n.updated_at = op.applied_at;
                n.revision = 1;
                n.embedding = ctx.embedder->embed(n.content);
                overlay.emplace(n.note_id, std::move(n));
                break;
            }
            case OpKind::update: {
                Note& n = overlay.at(op.target_note_ids.front());
                n.content = *op.new_content;
                n.embedding = ctx.embedder->embed(n.content);
                n.revision += 1;
                n.updated_at = op.applied_at;
                break;
            }
            case OpKind::del:
                overlay.at(op.target_note_ids.front()).status = NoteStatus::tombstoned;
                break;
        }
        ops.push_back(std::move(op));
    };

    auto base_op = [&](OpKind kind) {
        MemoryOp op;
        op.op_id = ctx.ids->next(EntityKind::op);
        op.user_id = trigger.user_id();
        op.kind = kind;
        op.trigger_query = trigger.query();
        op.supporting_episode_ids = trigger.supporting_episode_ids();
        op.applied_at = ctx.clock->now();
        return op;
    };

    for (const auto& candidate : candidates) {
        EmbeddingVector vec = ctx.embedder->embed(candidate.content);
        auto pool = evolution_detail::nearest_notes(overlay, vec, ctx.config.evolution.neighbor_k,
                                                    ctx.config.evolution.cosine_floor);

        RelationClassification cls;
        if (pool.empty()) {
            cls.verdict = RelationVerdict::independent;  // nothing nearby; no provider call
            cls.rationale = "no active note within the cosine floor";
        } else {
            ClassifyResponse resp;
            try {
                resp = call_typed<ClassifyResponse>(
                    *ctx.provider,
                    ctx.request(TaskTag::classify_relation,
                                build_classify_prompt(candidate.content, to_string(candidate.category),
                                                      trigger.query(), pool),
                                candidate.content),
                    parse_classify_response);
            } catch (const LlmParseError& e) {
                log::warn("relation classification unusable; candidate skipped: " +
                          std::string{e.what()});
                continue;
            } catch (const ProviderError& e) {
                log::warn("relation classification unavailable; candidate skipped: " +
                          std::string{e.what()});
                continue;
            }
            cls.verdict = resp.verdict;
            cls.target_note_id = resp.target_note_id;
            cls.rationale = resp.rationale;
            if (cls.verdict != RelationVerdict::independent) {
                bool in_pool = std::any_of(pool.begin(), pool.end(), [&](const Note* n) {
                    return n->note_id == *cls.target_note_id;
                });
                if (!in_pool) {
                    log::warn("classification targets a note outside the presented pool; skipped");
                    continue;
                }
                if (cls.verdict == RelationVerdict::extendable && !resp.merged_content) {
                    log::warn("extendable verdict without merged content; skipped");
                    continue;
                }
            }

            if (cls.verdict == RelationVerdict::extendable) {
                MemoryOp op = base_op(OpKind::update);
                op.target_note_ids = {*cls.target_note_id};
                op.relation_verdict = RelationVerdict::extendable;
                op.new_content = *resp.merged_content;
                stage(std::move(op));
                continue;
            }
            if (cls.verdict == RelationVerdict::contradictory) {
                // recency wins: tombstone the conflicting note, add the candidate
                MemoryOp del = base_op(OpKind::del);
                del.target_note_ids = {*cls.target_note_id};
                del.relation_verdict = RelationVerdict::contradictory;
                stage(std::move(del));
                MemoryOp add = base_op(OpKind::add);
                add.target_note_ids = {ctx.ids->next(EntityKind::note)};
                add.relation_verdict = RelationVerdict::contradictory;
                add.new_content = candidate.content;
                add.category = candidate.category;
                stage(std::move(add));
                continue;
            }
        }
        MemoryOp add = base_op(OpKind::add);
        add.target_note_ids = {ctx.ids->next(EntityKind::note)};
        add.relation_verdict = RelationVerdict::independent;
        add.new_content = candidate.content;
        add.category = candidate.category;
        stage(std::move(add));
    }

    notes.apply_ops(ops);
    return ops;
}

// Maintenance sweep: tombstones active notes whose usage_count is below the
// policy floor once they are older than min_age (measured from updated_at,
// so a revision refreshes a note's clock). Never runs implicitly, and
// episodes are never forgotten.
inline std::vector<std::string> run_forgetting(const ForgettingPolicy& policy,
                                               const std::string& user_id, NoteStore& notes,
                                               const EngineContext& ctx) {
    policy.validate();
    Instant now = ctx.clock->now();
    std::vector<MemoryOp> ops;
    std::vector<std::string> tombstoned;
    for (const auto& note : notes.for_user(user_id, NoteStatus::active)) {
        if (note.usage_count >= policy.min_usage) continue;
        if (now - note.updated_at <= policy.min_age) continue;
        MemoryOp op;
        op.op_id = ctx.ids->next(EntityKind::op);
        op.user_id = user_id;
        op.kind = OpKind::del;
        op.target_note_ids = {note.note_id};
        op.cause = kForgettingCause;
        op.applied_at = now;
        ops.push_back(std::move(op));
        tombstoned.push_back(note.note_id);
    }
    notes.apply_ops(ops);
    return tombstoned;
}

} // namespace engram
