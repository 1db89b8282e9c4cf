#pragma once

// Adapter for the LoCoMo benchmark's nested multi-session JSON. Produces the
// engine's flat shapes: one ingest file of turn records per conversation and
// one line-delimited question file. Conversation ids become user ids.
//
// Question category mapping (numeric codes in the source data):
//   1 -> multi_hop, 2 -> temporal, 3 -> open_domain, 4 -> single_hop,
//   5 -> adversarial

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "engram/clock.hpp"
#include "engram/errors.hpp"
#include "engram/eval.hpp"
#include "engram/text.hpp"

namespace engram {

// "1:56 pm on 8 May, 2023" -> instant
inline std::optional<Instant> parse_locomo_datetime(const std::string& s) {
    using namespace std::chrono;
    static const char* months[] = {"january", "february", "march",     "april",   "may",
                                   "june",    "july",     "august",    "september",
                                   "october", "november", "december"};
    auto words = whitespace_split(to_lower(s));
    // expected: [h:mm, am|pm, on, d, month,, yyyy]
    if (words.size() < 6) return std::nullopt;
    unsigned h = 0, mi = 0;
    if (std::sscanf(words[0].c_str(), "%u:%u", &h, &mi) != 2) return std::nullopt;
    bool pm = words[1] == "pm";
    if (!pm && words[1] != "am") return std::nullopt;
    if (h == 12) h = 0;
    if (pm) h += 12;
    unsigned d = static_cast<unsigned>(std::strtoul(words[3].c_str(), nullptr, 10));
    std::string month_word = words[4];
    while (!month_word.empty() && !std::isalpha(static_cast<unsigned char>(month_word.back())))
        month_word.pop_back();
    unsigned mo = 0;
    for (unsigned i = 0; i < 12; ++i)
        if (month_word == months[i]) mo = i + 1;
    if (mo == 0 || d == 0) return std::nullopt;
    int y = static_cast<int>(std::strtol(words[5].c_str(), nullptr, 10));
    year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Instant{sys_days{ymd} + hours{h} + minutes{mi}};
}

inline QuestionCategory locomo_category(int code) {
    switch (code) {
        case 1: return QuestionCategory::multi_hop;
        case 2: return QuestionCategory::temporal;
        case 3: return QuestionCategory::open_domain;
        case 4: return QuestionCategory::single_hop;
        case 5: return QuestionCategory::adversarial;
        default: throw validation_error("unknown LoCoMo category code " + std::to_string(code));
    }
}

struct LocomoAdaptResult {
    std::vector<std::string> conversation_ids;
    std::vector<std::string> session_files;  // one per conversation
    std::string questions_file;
    int sessions = 0;
    int turns = 0;
    int questions = 0;
};

// Writes <out_dir>/<conversation_id>.sessions.jsonl per conversation and a
// combined <out_dir>/questions.jsonl.
inline LocomoAdaptResult adapt_locomo(const std::string& locomo_path, const std::string& out_dir) {
    std::ifstream in(locomo_path);
    if (!in) throw io_error("cannot open LoCoMo file: " + locomo_path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string{"LoCoMo parse error: "} + e.what());
    }
    if (!root.is_array()) throw validation_error("expected a top-level array of conversations");

    std::filesystem::create_directories(out_dir);
    LocomoAdaptResult result;
    std::ofstream questions_out(std::filesystem::path(out_dir) / "questions.jsonl",
                                std::ios::trunc);
    result.questions_file = (std::filesystem::path(out_dir) / "questions.jsonl").string();

    int conv_index = 0;
    for (const auto& sample : root) {
        ++conv_index;
        std::string conv_id = sample.value("sample_id", std::string{});
        if (conv_id.empty()) conv_id = "conversation-" + std::to_string(conv_index);
        result.conversation_ids.push_back(conv_id);

        auto session_path = std::filesystem::path(out_dir) / (conv_id + ".sessions.jsonl");
        std::ofstream session_out(session_path, std::ios::trunc);
        result.session_files.push_back(session_path.string());

        const auto& conversation = sample.at("conversation");
        for (int s = 1;; ++s) {
            std::string key = "session_" + std::to_string(s);
            if (!conversation.contains(key)) break;
            const auto& turns = conversation[key];
            if (!turns.is_array()) continue;
            std::string ts_text = conversation.value(key + "_date_time", std::string{});
            auto ts = parse_locomo_datetime(ts_text);
            ++result.sessions;
            int idx = 0;
            for (const auto& turn : turns) {
                nlohmann::json line{{"session_id", key},
                                    {"turn_index", idx++},
                                    {"speaker", turn.value("speaker", std::string{"unknown"})},
                                    {"text", turn.value("text", std::string{})}};
                if (ts) line["session_timestamp"] = format_instant(*ts);
                session_out << line.dump() << "\n";
                ++result.turns;
            }
        }

        if (sample.contains("qa")) {
            for (const auto& qa : sample["qa"]) {
                std::string answer;
                if (qa.contains("answer"))
                    answer = qa["answer"].is_string() ? qa["answer"].get<std::string>()
                                                      : qa["answer"].dump();
                nlohmann::json line{{"conversation_id", conv_id},
                                    {"question", qa.value("question", std::string{})},
                                    {"answer", answer},
                                    {"category",
                                     to_string(locomo_category(qa.value("category", 4)))}};
                questions_out << line.dump() << "\n";
                ++result.questions;
            }
        }
    }
    return result;
}

} // namespace engram
