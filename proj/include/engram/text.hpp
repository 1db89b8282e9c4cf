#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace engram {

inline std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Lowercase word tokens, split on non-alphanumerics.
inline std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::vector<std::string> whitespace_split(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

// Desk-scale token estimate used by the offline providers and the evidence
// accounting: whitespace token count x 1.3, rounded up. Remote providers
// report exact usage instead.
inline std::int64_t estimate_tokens(const std::string& text) {
    std::int64_t words = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(words) * 1.3));
}

// Keep at most max_tokens whitespace tokens.
inline std::string truncate_tokens(const std::string& text, std::size_t max_tokens) {
    auto words = whitespace_split(text);
    if (words.size() <= max_tokens) return trim(text);
    std::string out;
    for (std::size_t i = 0; i < max_tokens; ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

inline std::unordered_map<std::string, int> term_frequencies(const std::string& text) {
    std::unordered_map<std::string, int> tf;
    for (auto& w : tokenize_words(text)) ++tf[w];
    return tf;
}

// Normalized term-frequency overlap in [0, 1]: sum over distinct query terms
// of min(tf_query, tf_doc), divided by the query token count.
inline double lexical_overlap(const std::string& query, const std::unordered_map<std::string, int>& doc_tf) {
    auto q_tokens = tokenize_words(query);
    if (q_tokens.empty()) return 0.0;
    std::unordered_map<std::string, int> q_tf;
    for (auto& w : q_tokens) ++q_tf[w];
    double overlap = 0.0;
    for (auto& [term, qf] : q_tf) {
        auto it = doc_tf.find(term);
        if (it != doc_tf.end()) overlap += std::min(qf, it->second);
    }
    return overlap / static_cast<double>(q_tokens.size());
}

} // namespace engram
