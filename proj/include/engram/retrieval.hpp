#pragma once

// Hierarchical retrieval. Hybrid queries both layers and makes one final
// answerability judgment; best-effort resolves at the note layer when the
// sufficiency judge allows it and descends to episodes otherwise. The judge
// is control-only. Reported latency covers memory retrieval (embedding and
// store searches), never judge or answer generation time.
//
// Judge failure policy is asymmetric on purpose: a note-layer failure
// descends (conservative recall), an episode-layer failure suppresses the
// trigger (reconsolidation must never fire on unverified evidence).
//
// Scripted-provider resolution keys:
//   judge_sufficiency -> "note:<query>" | "episode:<query>" | "hybrid:<query>"
//   answer            -> the query text

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "engram/context.hpp"
#include "engram/schemas.hpp"
#include "engram/stores.hpp"

namespace engram {

enum class Strategy { hybrid, best_effort };
enum class AnswerVerdict { answerable, unanswerable };
enum class Sufficiency { sufficient, insufficient };

inline const char* to_string(Strategy s) { return s == Strategy::hybrid ? "hybrid" : "best_effort"; }
inline const char* to_string(AnswerVerdict v) {
    return v == AnswerVerdict::answerable ? "answerable" : "unanswerable";
}

inline std::optional<Strategy> strategy_from_string(const std::string& s) {
    if (s == "hybrid") return Strategy::hybrid;
    if (s == "best_effort" || s == "best-effort") return Strategy::best_effort;
    return std::nullopt;
}

struct EvidenceBundle {
    std::string query;
    Strategy strategy = Strategy::hybrid;
    std::vector<ScoredHit> note_hits;
    std::vector<ScoredHit> episode_hits;
    AnswerVerdict verdict = AnswerVerdict::unanswerable;
    std::optional<bool> note_layer_sufficient;     // best-effort only
    std::optional<bool> episode_layer_sufficient;  // best-effort only
    std::chrono::microseconds retrieval_latency{0};
    std::int64_t evidence_tokens = 0;
    bool degraded_confidence = false;  // hybrid judge unavailable; fail-open

    std::vector<std::string> note_ids() const {
        std::vector<std::string> out;
        for (const auto& h : note_hits) out.push_back(h.item_id);
        return out;
    }

    std::vector<std::string> episode_ids() const {
        std::vector<std::string> out;
        for (const auto& h : episode_hits) out.push_back(h.item_id);
        return out;
    }
};

inline void to_json(json& j, const EvidenceBundle& b) {
    j = json{{"query", b.query},
             {"strategy", to_string(b.strategy)},
             {"note_hits", b.note_hits},
             {"episode_hits", b.episode_hits},
             {"verdict", to_string(b.verdict)},
             {"retrieval_latency_us", b.retrieval_latency.count()},
             {"evidence_tokens", b.evidence_tokens},
             {"degraded_confidence", b.degraded_confidence}};
    if (b.note_layer_sufficient) j["note_layer_sufficient"] = *b.note_layer_sufficient;
    if (b.episode_layer_sufficient) j["episode_layer_sufficient"] = *b.episode_layer_sufficient;
}

// A reconsolidation trigger can only exist for the (note insufficient,
// episode sufficient) verdict pair; the private constructor makes any other
// combination unrepresentable rather than merely unchecked.
class ReconsolidationTrigger {
public:
    static std::optional<ReconsolidationTrigger> from_verdicts(
        bool note_layer_sufficient, bool episode_layer_sufficient, std::string query,
        std::string user_id, std::vector<std::string> supporting_episode_ids,
        std::vector<ScoredHit> insufficient_note_hits) {
        if (note_layer_sufficient || !episode_layer_sufficient) return std::nullopt;
        if (supporting_episode_ids.empty()) return std::nullopt;
        return ReconsolidationTrigger(std::move(query), std::move(user_id),
                                      std::move(supporting_episode_ids),
                                      std::move(insufficient_note_hits));
    }

    const std::string& query() const { return query_; }
    const std::string& user_id() const { return user_id_; }
    const std::vector<std::string>& supporting_episode_ids() const { return episode_ids_; }
    const std::vector<ScoredHit>& insufficient_note_hits() const { return note_hits_; }

private:
    ReconsolidationTrigger(std::string query, std::string user_id,
                           std::vector<std::string> episode_ids, std::vector<ScoredHit> note_hits)
        : query_(std::move(query)),
          user_id_(std::move(user_id)),
          episode_ids_(std::move(episode_ids)),
          note_hits_(std::move(note_hits)) {}

    std::string query_;
    std::string user_id_;
    std::vector<std::string> episode_ids_;
    std::vector<ScoredHit> note_hits_;
};

namespace retrieval_detail {

inline std::vector<std::string> snippets_for_judge(const std::vector<ScoredHit>& hits,
                                                   std::int64_t budget_tokens) {
    std::vector<std::string> out;
    for (const auto& h : hits)
        out.push_back(truncate_tokens(h.snippet, static_cast<std::size_t>(budget_tokens)));
    return out;
}

inline std::int64_t count_tokens(const std::vector<std::string>& snippets) {
    std::int64_t total = 0;
    for (const auto& s : snippets) total += estimate_tokens(s);
    return total;
}

} // namespace retrieval_detail

// Binary control signal over retrieved evidence. Empty evidence is
// insufficient without a provider call. Parse and transport failures
// propagate; each retrieval path applies its own conservative policy.
inline Sufficiency judge_sufficiency(const std::string& query,
                                     const std::vector<std::string>& evidence_snippets,
                                     const EngineContext& ctx, const std::string& key) {
    if (evidence_snippets.empty()) return Sufficiency::insufficient;
    auto resp = call_typed<JudgeResponse>(
        *ctx.provider,
        ctx.request(TaskTag::judge_sufficiency, build_judge_prompt(query, evidence_snippets), key),
        parse_judge_response);
    return resp.sufficient ? Sufficiency::sufficient : Sufficiency::insufficient;
}

inline EvidenceBundle retrieve_hybrid(const std::string& query, const std::string& user_id, int k,
                                      EpisodeStore& episodes, NoteStore& notes,
                                      const EngineContext& ctx) {
    if (k < 1) throw validation_error("k must be >= 1");
    using clock = std::chrono::steady_clock;
    EvidenceBundle bundle;
    bundle.query = query;
    bundle.strategy = Strategy::hybrid;

    auto t0 = clock::now();
    EmbeddingVector qvec = ctx.embedder->embed(query);
    bundle.note_hits = notes.search(qvec, k, user_id);
    bundle.episode_hits = episodes.search(query, qvec, k, user_id);
    bundle.retrieval_latency =
        std::chrono::duration_cast<std::chrono::microseconds>(clock::now() - t0);

    std::int64_t budget = ctx.config.retrieval.snippet_token_budget;
    auto snippets = retrieval_detail::snippets_for_judge(bundle.note_hits, budget);
    auto episode_snips = retrieval_detail::snippets_for_judge(bundle.episode_hits, budget);
    snippets.insert(snippets.end(), episode_snips.begin(), episode_snips.end());
    bundle.evidence_tokens = retrieval_detail::count_tokens(snippets);

    if (snippets.empty()) {
        bundle.verdict = AnswerVerdict::unanswerable;
        return bundle;
    }
    try {
        auto s = judge_sufficiency(query, snippets, ctx, "hybrid:" + query);
        bundle.verdict =
            s == Sufficiency::sufficient ? AnswerVerdict::answerable : AnswerVerdict::unanswerable;
    } catch (const LlmParseError&) {
        bundle.verdict = AnswerVerdict::answerable;
        bundle.degraded_confidence = true;
    } catch (const ProviderError&) {
        bundle.verdict = AnswerVerdict::answerable;
        bundle.degraded_confidence = true;
    }
    if (bundle.verdict == AnswerVerdict::answerable && !bundle.note_hits.empty())
        notes.record_usage(bundle.note_ids());
    return bundle;
}

inline std::pair<EvidenceBundle, std::optional<ReconsolidationTrigger>> retrieve_best_effort(
    const std::string& query, const std::string& user_id, int k, EpisodeStore& episodes,
    NoteStore& notes, const EngineContext& ctx) {
    if (k < 1) throw validation_error("k must be >= 1");
    using clock = std::chrono::steady_clock;
    EvidenceBundle bundle;
    bundle.query = query;
    bundle.strategy = Strategy::best_effort;
    std::int64_t budget = ctx.config.retrieval.snippet_token_budget;

    auto t0 = clock::now();
    EmbeddingVector qvec = ctx.embedder->embed(query);
    bundle.note_hits = notes.search(qvec, k, user_id);
    bundle.retrieval_latency =
        std::chrono::duration_cast<std::chrono::microseconds>(clock::now() - t0);

    auto note_snips = retrieval_detail::snippets_for_judge(bundle.note_hits, budget);
    bool note_sufficient = false;
    try {
        note_sufficient =
            judge_sufficiency(query, note_snips, ctx, "note:" + query) == Sufficiency::sufficient;
    } catch (const LlmParseError&) {
        note_sufficient = false;  // conservative descent
    } catch (const ProviderError&) {
        note_sufficient = false;
    }
    bundle.note_layer_sufficient = note_sufficient;

    if (note_sufficient) {
        bundle.verdict = AnswerVerdict::answerable;
        bundle.evidence_tokens = retrieval_detail::count_tokens(note_snips);
        if (!bundle.note_hits.empty()) notes.record_usage(bundle.note_ids());
        return {std::move(bundle), std::nullopt};
    }

    auto t1 = clock::now();
    bundle.episode_hits = episodes.search(query, qvec, k, user_id);
    bundle.retrieval_latency +=
        std::chrono::duration_cast<std::chrono::microseconds>(clock::now() - t1);

    // the second judgment sees the combined evidence, not episodes alone
    auto combined = note_snips;
    auto episode_snips = retrieval_detail::snippets_for_judge(bundle.episode_hits, budget);
    combined.insert(combined.end(), episode_snips.begin(), episode_snips.end());
    bundle.evidence_tokens = retrieval_detail::count_tokens(combined);

    bool episode_sufficient = false;
    if (!bundle.episode_hits.empty()) {
        try {
            episode_sufficient =
                judge_sufficiency(query, combined, ctx, "episode:" + query) ==
                Sufficiency::sufficient;
        } catch (const LlmParseError&) {
            episode_sufficient = false;  // no trigger on unverified evidence
        } catch (const ProviderError&) {
            episode_sufficient = false;
        }
    }
    bundle.episode_layer_sufficient = episode_sufficient;

    if (!episode_sufficient) {
        bundle.verdict = AnswerVerdict::unanswerable;
        return {std::move(bundle), std::nullopt};
    }
    bundle.verdict = AnswerVerdict::answerable;
    if (!bundle.note_hits.empty()) notes.record_usage(bundle.note_ids());
    auto trigger = ReconsolidationTrigger::from_verdicts(false, true, query, user_id,
                                                         bundle.episode_ids(), bundle.note_hits);
    return {std::move(bundle), std::move(trigger)};
}

// Answer passthrough for the eval harness and the service. The engine's
// contract ends at evidence + verdict; this just forwards to the provider.
inline std::string generate_answer(const std::string& query, const EvidenceBundle& bundle,
                                   const EngineContext& ctx) {
    if (bundle.verdict == AnswerVerdict::unanswerable) return "unanswerable";
    std::int64_t budget = ctx.config.retrieval.snippet_token_budget;
    auto snippets = retrieval_detail::snippets_for_judge(bundle.note_hits, budget);
    auto episode_snips = retrieval_detail::snippets_for_judge(bundle.episode_hits, budget);
    snippets.insert(snippets.end(), episode_snips.begin(), episode_snips.end());
    try {
        auto resp = call_typed<AnswerResponse>(
            *ctx.provider, ctx.request(TaskTag::answer, build_answer_prompt(query, snippets), query),
            parse_answer_response);
        return resp.text;
    } catch (const LlmParseError& e) {
        log::warn("answer generation failed: " + std::string{e.what()});
        return "";
    } catch (const ProviderError& e) {
        log::warn("answer generation unavailable: " + std::string{e.what()});
        return "";
    }
}

} // namespace engram
