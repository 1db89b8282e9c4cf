#pragma once

// Structured request/response schemas for each provider task. Prompts carry
// their machine-readable input as a JSON block after an "INPUT:" marker so
// the offline heuristic provider can work from exactly what a remote model
// sees. Responses are strict JSON; one repair retry, then the parse error
// surfaces to the caller's fallback policy.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "engram/provider.hpp"
#include "engram/types.hpp"

namespace engram {

inline constexpr const char* kPromptInputMarker = "\nINPUT:\n";

struct SegmentLabel {
    std::string topic;
    std::string summary;
};

struct SegmentResponse {
    std::vector<int> topic_boundaries;     // channel 1: topical shifts
    std::vector<int> surprise_boundaries;  // channel 2: salient discontinuities
    std::vector<SegmentLabel> labels;      // optional, aligned to the fused segments
};

struct ExtractedItem {
    std::string content;
    std::string category;  // fact | preference | profile
    std::vector<int> source_turn_indices;
};

struct ExtractResponse {
    std::vector<ExtractedItem> items;
};

struct NormalizeResponse {
    std::string text;
};

struct JudgeResponse {
    bool sufficient = false;
};

struct ClassifyResponse {
    RelationVerdict verdict = RelationVerdict::independent;
    std::optional<std::string> target_note_id;
    std::optional<std::string> merged_content;
    std::string rationale;
};

struct AnswerResponse {
    std::string text;
};

struct GptScoreResponse {
    double score = 0.0;  // 0..100
};

// ---------------------------------------------------------------------------
// Prompt builders

namespace detail {
inline std::string with_input(std::string instructions, const nlohmann::json& payload) {
    instructions += kPromptInputMarker;
    instructions += payload.dump();
    return instructions;
}
} // namespace detail

// Recovers the JSON input block from a prompt; the heuristic provider's view
// of the request.
inline nlohmann::json prompt_input(const std::string& prompt) {
    auto pos = prompt.rfind(kPromptInputMarker);
    if (pos == std::string::npos) throw validation_error("prompt has no INPUT block");
    auto body = prompt.substr(pos + std::string(kPromptInputMarker).size());
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string{"prompt INPUT block is not JSON: "} + e.what());
    }
}

inline std::string build_segment_prompt(const std::string& session_id,
                                        const std::vector<DialogueTurn>& turns) {
    nlohmann::json jturns = nlohmann::json::array();
    for (const auto& t : turns)
        jturns.push_back({{"turn_index", t.turn_index}, {"speaker", t.speaker}, {"text", t.text}});
    return detail::with_input(
        "Segment the dialogue into episodes using two independent channels. Channel 1 flags a "
        "turn index where the topic or discourse goal shifts. Channel 2 flags a turn index with "
        "a salient discontinuity such as an abrupt change of intent or emotional state. Report "
        "both channels separately; do not merge them. For each resulting segment (segments start "
        "at turn 0 and at every flagged index from either channel) give a short topic and a "
        "one-sentence summary. Respond with JSON only: {\"topic_boundaries\":[int], "
        "\"surprise_boundaries\":[int], \"labels\":[{\"topic\":str,\"summary\":str}]}",
        {{"session_id", session_id}, {"turns", jturns}});
}

inline std::string build_extract_stage1_prompt(const Episode& e) {
    nlohmann::json jturns = nlohmann::json::array();
    for (const auto& t : e.turns)
        jturns.push_back({{"turn_index", t.turn_index}, {"speaker", t.speaker}, {"text", t.text}});
    return detail::with_input(
        "Extract independently interpretable factual and situational statements from the episode. "
        "Each item must be a standalone declarative sentence grounded in the turns it cites. "
        "Respond with JSON only: {\"items\":[{\"content\":str,\"category\":\"fact\","
        "\"source_turn_indices\":[int]}]}",
        {{"episode_id", e.episode_id}, {"topic", e.topic}, {"turns", jturns}});
}

inline std::string build_extract_stage2_prompt(const Episode& e,
                                               const std::vector<std::string>& stage1_contents) {
    nlohmann::json jturns = nlohmann::json::array();
    for (const auto& t : e.turns)
        jturns.push_back({{"turn_index", t.turn_index}, {"speaker", t.speaker}, {"text", t.text}});
    return detail::with_input(
        "Identify high-confidence implicit information about user preferences and stable user "
        "traits in the episode. Do not introduce new facts and do not repeat the stage-1 items "
        "given in the input. Respond with JSON only: {\"items\":[{\"content\":str,"
        "\"category\":\"preference\"|\"profile\",\"source_turn_indices\":[int]}]}",
        {{"topic", e.topic}, {"turns", jturns}, {"stage1", stage1_contents}});
}

inline std::string build_query_extract_prompt(const std::string& query,
                                              const std::vector<const Episode*>& episodes) {
    nlohmann::json jeps = nlohmann::json::array();
    for (const auto* e : episodes)
        jeps.push_back({{"episode_id", e->episode_id}, {"topic", e->topic}, {"text", e->joined_text()}});
    return detail::with_input(
        "Extract the knowledge from these episodes that answers or bears on the query. Each item "
        "must be a standalone declarative sentence. Respond with JSON only: "
        "{\"items\":[{\"content\":str,\"category\":\"fact\"|\"preference\"|\"profile\"}]}",
        {{"query", query}, {"episodes", jeps}});
}

inline std::string build_normalize_prompt(const std::string& text, const std::string& speaker,
                                          const std::string& context) {
    return detail::with_input(
        "Rewrite the sentence so every pronoun and definite mention is replaced by the canonical "
        "entity name it refers to in the context. Change nothing else. Respond with JSON only: "
        "{\"text\":str}",
        {{"text", text}, {"speaker", speaker}, {"context", context}});
}

inline std::string build_judge_prompt(const std::string& query,
                                      const std::vector<std::string>& evidence) {
    return detail::with_input(
        "Decide whether the evidence is sufficient to answer the query. This is a control "
        "decision only. Respond with JSON only: {\"verdict\":\"sufficient\"|\"insufficient\"}",
        {{"query", query}, {"evidence", evidence}});
}

inline std::string build_classify_prompt(const std::string& candidate_content,
                                         const std::string& candidate_category,
                                         const std::string& query,
                                         const std::vector<const Note*>& nearest) {
    nlohmann::json jnotes = nlohmann::json::array();
    for (const auto* n : nearest)
        jnotes.push_back({{"note_id", n->note_id}, {"content", n->content}});
    return detail::with_input(
        "Classify the relation of the candidate knowledge to the existing notes: independent (no "
        "note covers it), extendable (it enriches exactly one note; give merged content), or "
        "contradictory (it conflicts with exactly one note). Respond with JSON only: "
        "{\"verdict\":\"independent\"|\"extendable\"|\"contradictory\",\"target_note_id\":str?,"
        "\"merged_content\":str?,\"rationale\":str}",
        {{"candidate", {{"content", candidate_content}, {"category", candidate_category}}},
         {"query", query},
         {"notes", jnotes}});
}

inline std::string build_answer_prompt(const std::string& query,
                                       const std::vector<std::string>& evidence) {
    return detail::with_input(
        "Answer the query using only the evidence. Be brief and direct. Respond with JSON only: "
        "{\"text\":str}",
        {{"query", query}, {"evidence", evidence}});
}

// Correctness judge used for the optional report score. This prompt is this
// project's own; scores are comparable within a run of this harness, not
// against numbers produced by other judges.
inline std::string build_gpt_score_prompt(const std::string& question, const std::string& gold,
                                          const std::string& prediction) {
    return detail::with_input(
        "Grade the prediction against the gold answer for the question on a 0-100 scale, where "
        "100 means semantically equivalent and correct, 50 means partially correct, and 0 means "
        "wrong or unsupported. Respond with JSON only: {\"score\":number}",
        {{"question", question}, {"gold", gold}, {"prediction", prediction}});
}

// ---------------------------------------------------------------------------
// Response parsing

namespace detail {
// Providers sometimes fence JSON in markdown or prepend prose; take the
// outermost object.
inline nlohmann::json extract_json_object(const std::string& raw) {
    auto b = raw.find('{');
    auto e = raw.rfind('}');
    if (b == std::string::npos || e == std::string::npos || e < b)
        throw LlmParseError("response contains no JSON object", raw);
    try {
        return nlohmann::json::parse(raw.substr(b, e - b + 1));
    } catch (const nlohmann::json::exception& ex) {
        throw LlmParseError(std::string{"response JSON malformed: "} + ex.what(), raw);
    }
}

inline std::vector<int> int_list(const nlohmann::json& j, const char* field, const std::string& raw) {
    std::vector<int> out;
    if (!j.contains(field)) return out;
    if (!j[field].is_array()) throw LlmParseError(std::string{field} + " must be an array", raw);
    for (const auto& v : j[field]) {
        if (!v.is_number_integer()) throw LlmParseError(std::string{field} + " must hold integers", raw);
        out.push_back(v.get<int>());
    }
    return out;
}
} // namespace detail

inline SegmentResponse parse_segment_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    SegmentResponse r;
    r.topic_boundaries = detail::int_list(j, "topic_boundaries", raw);
    r.surprise_boundaries = detail::int_list(j, "surprise_boundaries", raw);
    if (j.contains("labels")) {
        if (!j["labels"].is_array()) throw LlmParseError("labels must be an array", raw);
        for (const auto& l : j["labels"])
            r.labels.push_back({l.value("topic", std::string{}), l.value("summary", std::string{})});
    }
    return r;
}

inline ExtractResponse parse_extract_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    if (!j.contains("items") || !j["items"].is_array())
        throw LlmParseError("extract response missing items array", raw);
    ExtractResponse r;
    for (const auto& it : j["items"]) {
        ExtractedItem item;
        item.content = it.value("content", std::string{});
        item.category = it.value("category", std::string{});
        if (it.contains("source_turn_indices"))
            item.source_turn_indices = detail::int_list(it, "source_turn_indices", raw);
        r.items.push_back(std::move(item));
    }
    return r;
}

inline NormalizeResponse parse_normalize_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    if (!j.contains("text") || !j["text"].is_string())
        throw LlmParseError("normalize response missing text", raw);
    return {j["text"].get<std::string>()};
}

inline JudgeResponse parse_judge_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    auto v = j.value("verdict", std::string{});
    if (v == "sufficient") return {true};
    if (v == "insufficient") return {false};
    throw LlmParseError("judge verdict must be sufficient|insufficient", raw);
}

inline ClassifyResponse parse_classify_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    auto v = relation_verdict_from_string(j.value("verdict", std::string{}));
    if (!v) throw LlmParseError("relation verdict must be independent|extendable|contradictory", raw);
    ClassifyResponse r;
    r.verdict = *v;
    if (j.contains("target_note_id") && j["target_note_id"].is_string())
        r.target_note_id = j["target_note_id"].get<std::string>();
    if (j.contains("merged_content") && j["merged_content"].is_string())
        r.merged_content = j["merged_content"].get<std::string>();
    r.rationale = j.value("rationale", std::string{});
    if (r.verdict != RelationVerdict::independent && !r.target_note_id)
        throw LlmParseError("non-independent verdict requires target_note_id", raw);
    return r;
}

inline AnswerResponse parse_answer_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    if (!j.contains("text") || !j["text"].is_string())
        throw LlmParseError("answer response missing text", raw);
    return {j["text"].get<std::string>()};
}

inline GptScoreResponse parse_gpt_score_response(const std::string& raw) {
    auto j = detail::extract_json_object(raw);
    if (!j.contains("score") || !j["score"].is_number())
        throw LlmParseError("score response missing numeric score", raw);
    double s = j["score"].get<double>();
    if (s < 0.0 || s > 100.0) throw LlmParseError("score out of 0-100 range", raw);
    return {s};
}

// Issues the request, parses, and on a schema violation retries once with a
// repair instruction before letting the parse error escape. Transport errors
// are not retried here; the calling module owns that policy.
template <typename T, typename ParseFn>
inline T call_typed(LlmProvider& provider, LlmRequest request, ParseFn parse) {
    LlmResult first = provider.complete(request);
    try {
        return parse(first.text);
    } catch (const LlmParseError&) {
        request.prompt += "\nYour previous reply did not match the schema. Respond with ONLY the JSON object.";
        LlmResult second = provider.complete(request);
        return parse(second.text);  // second failure propagates
    }
}

} // namespace engram
