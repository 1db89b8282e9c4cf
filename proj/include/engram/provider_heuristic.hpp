#pragma once

// Rule-based offline provider. It reads the same INPUT payload a remote
// model would see and answers every task with fixed lexical rules, so full
// pipeline runs work with no network and no nondeterminism. The rules are
// deliberately crude approximations; tests that need exact control use the
// scripted provider instead.

#include <algorithm>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "engram/provider.hpp"
#include "engram/schemas.hpp"

namespace engram {

namespace heuristics {

inline const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "the", "and", "for", "you", "your", "yours", "are", "was", "were", "but", "not",
        "with", "have", "has", "had", "this", "that", "these", "those", "how", "what",
        "when", "where", "who", "why", "she", "her", "him", "his", "they", "them", "its",
        "about", "just", "really", "very", "there", "here", "will", "would", "could",
        "should", "did", "does", "doing", "been", "being", "from", "into", "out", "all",
    };
    return words;
}

inline std::vector<std::string> content_words(const std::string& text) {
    std::vector<std::string> out;
    for (auto& w : tokenize_words(text))
        if (w.size() >= 3 && !stopwords().count(w)) out.push_back(w);
    return out;
}

inline bool starts_with_any(const std::string& lower, const std::vector<std::string>& prefixes) {
    return std::any_of(prefixes.begin(), prefixes.end(),
                       [&](const std::string& p) { return lower.rfind(p, 0) == 0; });
}

inline bool contains_any(const std::string& lower, const std::vector<std::string>& needles) {
    return std::any_of(needles.begin(), needles.end(),
                       [&](const std::string& n) { return lower.find(n) != std::string::npos; });
}

inline bool is_greeting(const std::string& text) {
    return starts_with_any(to_lower(trim(text)),
                           {"hi", "hello", "hey", "thanks", "thank you", "bye", "goodbye",
                            "good morning", "good night", "see you"});
}

// "love" -> "loves", "have" -> "has", "wash" -> "washes", "try" -> "tries".
// Modals and (apparent) past-tense forms pass through unchanged.
inline std::string third_person(const std::string& verb) {
    static const std::unordered_set<std::string> unchanged = {
        "will", "would", "can", "could", "may", "might", "must", "shall", "should",
        "went", "got", "had", "saw", "made", "took", "came", "said", "told", "thought",
        "felt", "knew", "met", "gave", "found", "bought", "ate", "ran", "wrote", "grew",
        "left", "kept", "began", "won", "lost", "spent", "sent", "built", "heard",
    };
    if (unchanged.count(verb)) return verb;
    if (verb.size() > 3 && verb.compare(verb.size() - 2, 2, "ed") == 0 &&
        verb.compare(verb.size() - 3, 3, "eed") != 0)
        return verb;  // past tense
    if (verb == "am") return "is";
    if (verb == "are") return "is";
    if (verb == "have") return "has";
    if (verb == "do") return "does";
    if (verb == "go") return "goes";
    if (verb == "was" || verb == "were") return "was";
    if (verb.size() >= 2) {
        char last = verb.back();
        char prev = verb[verb.size() - 2];
        if (last == 's' || last == 'x' || last == 'z') return verb + "es";
        if ((last == 'h') && (prev == 'c' || prev == 's')) return verb + "es";
        if (last == 'y' && std::string("aeiou").find(prev) == std::string::npos)
            return verb.substr(0, verb.size() - 1) + "ies";
    }
    return verb + "s";
}

// Speaker-pronoun resolution: a leading "I <verb>" is rewritten with the
// speaker's name and verb agreement, then remaining first-person pronouns
// are substituted. Anything else gets the "<Speaker>: <text>" prefix form.
inline std::string resolve_speaker_pronouns(const std::string& text, const std::string& speaker) {
    std::string t = trim(text);
    if (t.rfind("I ", 0) != 0) return speaker + ": " + t;
    auto space = t.find(' ', 2);
    std::string verb = t.substr(2, space == std::string::npos ? std::string::npos : space - 2);
    bool verb_like = !verb.empty() && std::all_of(verb.begin(), verb.end(), [](unsigned char c) {
        return std::islower(c);
    });
    if (!verb_like) return speaker + ": " + t;
    std::string rest = space == std::string::npos ? "" : t.substr(space);
    std::string out = speaker + " " + third_person(verb) + rest;

    auto replace_word = [](std::string s, const std::string& word, const std::string& with) {
        std::string result;
        std::size_t i = 0;
        while (i < s.size()) {
            bool at_start = i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
            if (at_start && s.compare(i, word.size(), word) == 0) {
                std::size_t end = i + word.size();
                if (end == s.size() || !std::isalnum(static_cast<unsigned char>(s[end]))) {
                    result += with;
                    i = end;
                    continue;
                }
            }
            result += s[i++];
        }
        return result;
    };
    out = replace_word(out, "I", speaker);
    out = replace_word(out, "my", speaker + "'s");
    out = replace_word(out, "My", speaker + "'s");
    out = replace_word(out, "me", speaker);
    return out;
}

} // namespace heuristics

class HeuristicProvider final : public LlmProvider {
public:
    LlmResult complete(const LlmRequest& request) override {
        nlohmann::json input = prompt_input(request.prompt);
        nlohmann::json response;
        switch (request.task_tag) {
            case TaskTag::segment: response = segment(input); break;
            case TaskTag::extract_stage1: response = extract_stage1(input); break;
            case TaskTag::extract_stage2: response = extract_stage2(input); break;
            case TaskTag::normalize: response = normalize(input); break;
            case TaskTag::judge_sufficiency: response = judge(input); break;
            case TaskTag::classify_relation: response = classify(input); break;
            case TaskTag::answer: response = answer(input); break;
            case TaskTag::gpt_score: response = gpt_score(input); break;
        }
        LlmResult r;
        r.text = response.dump();
        r.usage.prompt_tokens = estimate_tokens(request.prompt);
        r.usage.completion_tokens = estimate_tokens(r.text);
        return r;
    }

    std::string name() const override { return "heuristic"; }

private:
    using json = nlohmann::json;

    static json segment(const json& input) {
        using namespace heuristics;
        const auto& turns = input.at("turns");
        std::vector<int> topic, surprise;
        std::vector<std::vector<std::string>> words(turns.size());
        std::vector<std::string> speakers(turns.size()), texts(turns.size());
        for (std::size_t i = 0; i < turns.size(); ++i) {
            texts[i] = turns[i].value("text", std::string{});
            speakers[i] = turns[i].value("speaker", std::string{});
            words[i] = content_words(texts[i]);
        }
        int last_topic_boundary = 0;
        for (std::size_t i = 1; i < turns.size(); ++i) {
            std::string lower = to_lower(trim(texts[i]));
            bool marker = starts_with_any(lower, {"by the way", "anyway", "speaking of",
                                                  "on another note", "let's talk",
                                                  "changing the subject", "so, about"});
            bool disjoint = !words[i].empty() && !words[i - 1].empty() &&
                            std::none_of(words[i].begin(), words[i].end(), [&](const std::string& w) {
                                return std::find(words[i - 1].begin(), words[i - 1].end(), w) !=
                                       words[i - 1].end();
                            });
            if (marker || (disjoint && static_cast<int>(i) - last_topic_boundary >= 3 &&
                           words[i].size() >= 3 && words[i - 1].size() >= 3)) {
                topic.push_back(static_cast<int>(i));
                last_topic_boundary = static_cast<int>(i);
            }
            bool exclaim = contains_any(texts[i], {"!!", "?!", "!?"}) ||
                           starts_with_any(lower, {"wow", "whoa", "oh no", "no way", "big news",
                                                   "guess what", "unbelievable", "amazing news"});
            bool speaker_shift = speakers[i] != speakers[i - 1];
            if (exclaim && speaker_shift) surprise.push_back(static_cast<int>(i));
        }

        std::set<int> fused{0};
        fused.insert(topic.begin(), topic.end());
        fused.insert(surprise.begin(), surprise.end());
        json labels = json::array();
        std::vector<int> starts(fused.begin(), fused.end());
        for (std::size_t s = 0; s < starts.size(); ++s) {
            int begin = starts[s];
            int end = s + 1 < starts.size() ? starts[s + 1] : static_cast<int>(turns.size());
            std::map<std::string, int> freq;
            for (int i = begin; i < end; ++i)
                for (auto& w : words[static_cast<std::size_t>(i)]) ++freq[w];
            std::vector<std::pair<std::string, int>> ranked(freq.begin(), freq.end());
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            std::string topic_label;
            for (std::size_t i = 0; i < ranked.size() && i < 2; ++i) {
                if (!topic_label.empty()) topic_label += " ";
                topic_label += ranked[i].first;
            }
            if (topic_label.empty()) topic_label = "chitchat";
            labels.push_back({{"topic", topic_label},
                              {"summary", truncate_tokens(texts[static_cast<std::size_t>(begin)], 18)}});
        }
        return {{"topic_boundaries", topic}, {"surprise_boundaries", surprise}, {"labels", labels}};
    }

    static json extract_stage1(const json& input) {
        using namespace heuristics;
        json items = json::array();
        for (const auto& turn : input.at("turns")) {
            std::string text = trim(turn.value("text", std::string{}));
            if (text.empty() || is_greeting(text)) continue;
            if (text.back() != '.') continue;
            if (whitespace_split(text).size() < 4) continue;
            items.push_back({{"content", text},
                             {"category", "fact"},
                             {"source_turn_indices", json::array({turn.value("turn_index", 0)})}});
        }
        return {{"items", items}};
    }

    static json extract_stage2(const json& input) {
        using namespace heuristics;
        json items = json::array();
        for (const auto& turn : input.at("turns")) {
            std::string text = trim(turn.value("text", std::string{}));
            std::string lower = to_lower(text);
            int idx = turn.value("turn_index", 0);
            if (contains_any(lower, {"i like", "i love", "i prefer", "i enjoy", "i hate",
                                     "favorite", "can't stand"})) {
                items.push_back({{"content", text},
                                 {"category", "preference"},
                                 {"source_turn_indices", json::array({idx})}});
            } else if (contains_any(lower, {"i am a", "i'm a", "i work", "my job", "my name is",
                                            "i live"})) {
                items.push_back({{"content", text},
                                 {"category", "profile"},
                                 {"source_turn_indices", json::array({idx})}});
            }
        }
        return {{"items", items}};
    }

    static json normalize(const json& input) {
        std::string text = input.value("text", std::string{});
        std::string speaker = input.value("speaker", std::string{});
        if (speaker.empty()) return {{"text", text}};
        return {{"text", heuristics::resolve_speaker_pronouns(text, speaker)}};
    }

    static json judge(const json& input) {
        using namespace heuristics;
        auto q_words = content_words(input.value("query", std::string{}));
        std::set<std::string> q_set(q_words.begin(), q_words.end());
        std::size_t needed = q_set.size() >= 2 ? 2 : 1;
        bool sufficient = false;
        for (const auto& snippet : input.at("evidence")) {
            auto words = content_words(snippet.get<std::string>());
            std::set<std::string> seen;
            for (auto& w : words)
                if (q_set.count(w)) seen.insert(w);
            if (seen.size() >= needed) {
                sufficient = true;
                break;
            }
        }
        return {{"verdict", sufficient ? "sufficient" : "insufficient"}};
    }

    static json classify(const json& input) {
        using namespace heuristics;
        std::string candidate = input.at("candidate").value("content", std::string{});
        auto c_words = content_words(candidate);
        std::set<std::string> c_set(c_words.begin(), c_words.end());

        double best_score = 0.0;
        std::string best_id, best_content;
        for (const auto& note : input.at("notes")) {
            auto n_words = content_words(note.value("content", std::string{}));
            std::set<std::string> n_set(n_words.begin(), n_words.end());
            std::set<std::string> uni(c_set.begin(), c_set.end());
            uni.insert(n_set.begin(), n_set.end());
            if (uni.empty()) continue;
            std::size_t inter = 0;
            for (auto& w : c_set)
                if (n_set.count(w)) ++inter;
            double jaccard = static_cast<double>(inter) / static_cast<double>(uni.size());
            if (jaccard > best_score) {
                best_score = jaccard;
                best_id = note.value("note_id", std::string{});
                best_content = note.value("content", std::string{});
            }
        }
        if (best_id.empty() || best_score < 0.2)
            return {{"verdict", "independent"}, {"rationale", "no note overlaps the candidate"}};

        auto negated = [](const std::string& s) {
            return contains_any(to_lower(s), {" not ", "n't", " never ", " no longer ", " stopped "});
        };
        if (negated(candidate) != negated(best_content))
            return {{"verdict", "contradictory"},
                    {"target_note_id", best_id},
                    {"rationale", "polarity differs from the overlapping note"}};
        return {{"verdict", "extendable"},
                {"target_note_id", best_id},
                {"merged_content", best_content + "; " + candidate},
                {"rationale", "candidate enriches the overlapping note"}};
    }

    static json answer(const json& input) {
        const auto& evidence = input.at("evidence");
        if (evidence.empty()) return {{"text", "I don't know."}};
        return {{"text", truncate_tokens(evidence[0].get<std::string>(), 40)}};
    }

    static json gpt_score(const json& input) {
        using namespace heuristics;
        auto g = content_words(input.value("gold", std::string{}));
        auto p = content_words(input.value("prediction", std::string{}));
        std::set<std::string> gs(g.begin(), g.end()), ps(p.begin(), p.end());
        std::set<std::string> uni(gs.begin(), gs.end());
        uni.insert(ps.begin(), ps.end());
        if (uni.empty()) return {{"score", 100.0}};
        std::size_t inter = 0;
        for (auto& w : gs)
            if (ps.count(w)) ++inter;
        return {{"score", 100.0 * static_cast<double>(inter) / static_cast<double>(uni.size())}};
    }
};

} // namespace engram
