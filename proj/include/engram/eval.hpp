#pragma once

// Evaluation harness over line-delimited question files:
//   {"conversation_id": str, "question": str, "answer": str, "category": str}
// conversation_id names the user whose memory answers the question, so
// memory must be built before running. Token-level F1 is the lexical metric;
// the adversarial category is always excluded from aggregate scores. The
// optional judge score column exists only when a remote judge provider is
// configured; its absence never changes the other columns.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "engram/engine.hpp"

namespace engram {

// ---------------------------------------------------------------------------
// Token F1

namespace eval_detail {
inline bool is_article(const std::string& w) { return w == "a" || w == "an" || w == "the"; }
} // namespace eval_detail

// Lowercase, strip punctuation, drop articles.
inline std::vector<std::string> normalize_answer_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (auto& w : tokenize_words(text))
        if (!eval_detail::is_article(w)) out.push_back(w);
    return out;
}

// F1 = 2PR/(P+R) over token multisets. Both sides empty after normalization
// is a perfect match; exactly one empty side scores zero.
inline double compute_f1(const std::string& prediction, const std::string& gold) {
    auto p_tokens = normalize_answer_tokens(prediction);
    auto g_tokens = normalize_answer_tokens(gold);
    if (p_tokens.empty() && g_tokens.empty()) return 1.0;
    if (p_tokens.empty() || g_tokens.empty()) return 0.0;
    std::map<std::string, int> p_counts, g_counts;
    for (auto& t : p_tokens) ++p_counts[t];
    for (auto& t : g_tokens) ++g_counts[t];
    double overlap = 0.0;
    for (auto& [tok, pc] : p_counts) {
        auto it = g_counts.find(tok);
        if (it != g_counts.end()) overlap += std::min(pc, it->second);
    }
    if (overlap == 0.0) return 0.0;
    double precision = overlap / static_cast<double>(p_tokens.size());
    double recall = overlap / static_cast<double>(g_tokens.size());
    return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Records

enum class QuestionCategory { single_hop, multi_hop, temporal, open_domain, adversarial };

inline const char* to_string(QuestionCategory c) {
    switch (c) {
        case QuestionCategory::single_hop: return "single_hop";
        case QuestionCategory::multi_hop: return "multi_hop";
        case QuestionCategory::temporal: return "temporal";
        case QuestionCategory::open_domain: return "open_domain";
        case QuestionCategory::adversarial: return "adversarial";
    }
    return "single_hop";
}

inline std::optional<QuestionCategory> category_from_string(const std::string& s) {
    if (s == "single_hop") return QuestionCategory::single_hop;
    if (s == "multi_hop") return QuestionCategory::multi_hop;
    if (s == "temporal") return QuestionCategory::temporal;
    if (s == "open_domain") return QuestionCategory::open_domain;
    if (s == "adversarial") return QuestionCategory::adversarial;
    return std::nullopt;
}

// Adversarial questions test unanswerability, not answer quality, so they
// never enter aggregate scores.
inline bool counts_toward_aggregates(QuestionCategory c) {
    return c != QuestionCategory::adversarial;
}

struct EvalQuestion {
    std::string conversation_id;
    std::string question;
    std::string answer;
    QuestionCategory category = QuestionCategory::single_hop;
};

struct EvalRecord {
    std::string conversation_id;
    std::string question;
    std::string gold_answer;
    QuestionCategory category = QuestionCategory::single_hop;
    std::string predicted;
    double f1 = 0.0;
    std::optional<double> gpt_score;
    std::chrono::microseconds retrieval_latency{0};
    std::int64_t evidence_tokens = 0;
    std::string verdict;
    std::vector<std::string> evidence_note_ids;
    std::vector<std::string> evidence_episode_ids;
    std::optional<std::string> error;
};

inline void to_json(json& j, const EvalRecord& r) {
    j = json{{"conversation_id", r.conversation_id},
             {"question", r.question},
             {"gold_answer", r.gold_answer},
             {"category", to_string(r.category)},
             {"predicted", r.predicted},
             {"f1", r.f1},
             {"retrieval_latency_us", r.retrieval_latency.count()},
             {"evidence_tokens", r.evidence_tokens},
             {"verdict", r.verdict},
             {"evidence_note_ids", r.evidence_note_ids},
             {"evidence_episode_ids", r.evidence_episode_ids}};
    if (r.gpt_score) j["gpt_score"] = *r.gpt_score;
    if (r.error) j["error"] = *r.error;
}

inline std::vector<EvalQuestion> load_questions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open question file: " + path);
    std::vector<EvalQuestion> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw validation_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        EvalQuestion q;
        q.conversation_id = j.at("conversation_id").get<std::string>();
        q.question = j.at("question").get<std::string>();
        q.answer = j.at("answer").get<std::string>();
        auto cat = category_from_string(j.at("category").get<std::string>());
        if (!cat)
            throw validation_error(path + ":" + std::to_string(line_no) + ": bad category");
        q.category = *cat;
        out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregates

struct Aggregate {
    int n = 0;
    double mean_f1 = 0.0;
    std::optional<double> mean_gpt_score;
    double mean_latency_ms = 0.0;
    double mean_evidence_tokens = 0.0;
};

struct EvalTrial {
    std::vector<EvalRecord> records;
    std::map<QuestionCategory, Aggregate> by_category;
    Aggregate overall;  // adversarial excluded
    int errors = 0;
};

struct EvalReport {
    std::vector<EvalTrial> trials;
    Strategy strategy = Strategy::hybrid;
    int k = 10;
};

inline Aggregate aggregate_records(const std::vector<const EvalRecord*>& records) {
    Aggregate a;
    double gpt_sum = 0.0;
    int gpt_n = 0;
    for (const auto* r : records) {
        ++a.n;
        a.mean_f1 += r->f1;
        a.mean_latency_ms += static_cast<double>(r->retrieval_latency.count()) / 1000.0;
        a.mean_evidence_tokens += static_cast<double>(r->evidence_tokens);
        if (r->gpt_score) {
            gpt_sum += *r->gpt_score;
            ++gpt_n;
        }
    }
    if (a.n > 0) {
        a.mean_f1 /= a.n;
        a.mean_latency_ms /= a.n;
        a.mean_evidence_tokens /= a.n;
        if (gpt_n > 0) a.mean_gpt_score = gpt_sum / gpt_n;
    }
    return a;
}

inline void finalize_trial(EvalTrial& trial) {
    std::map<QuestionCategory, std::vector<const EvalRecord*>> grouped;
    std::vector<const EvalRecord*> scored;
    for (const auto& r : trial.records) {
        if (r.error) {
            ++trial.errors;
            continue;
        }
        grouped[r.category].push_back(&r);
        if (counts_toward_aggregates(r.category)) scored.push_back(&r);
    }
    for (auto& [cat, recs] : grouped) trial.by_category[cat] = aggregate_records(recs);
    trial.overall = aggregate_records(scored);
}

// ---------------------------------------------------------------------------
// Runner

struct EvalOptions {
    int trials = 1;
    int parallel = 1;
    std::string results_path;  // JSONL of EvalRecords, one file per run
    bool with_gpt_score = false;  // set by the engine config (remote judge present)
};

inline EvalRecord eval_one(MemoryEngine& engine, const EvalQuestion& q, Strategy strategy, int k,
                           bool with_gpt_score) {
    EvalRecord rec;
    rec.conversation_id = q.conversation_id;
    rec.question = q.question;
    rec.gold_answer = q.answer;
    rec.category = q.category;
    if (engine.episodes(q.conversation_id).empty() &&
        engine.notes(q.conversation_id, std::nullopt).empty()) {
        rec.error = "no memory built for conversation " + q.conversation_id;
        return rec;
    }
    QueryResult result = engine.query(q.conversation_id, q.question, strategy, k, true);
    rec.predicted = result.answer.value_or("");
    rec.f1 = compute_f1(rec.predicted, rec.gold_answer);
    rec.retrieval_latency = result.bundle.retrieval_latency;
    rec.evidence_tokens = result.bundle.evidence_tokens;
    rec.verdict = to_string(result.bundle.verdict);
    rec.evidence_note_ids = result.bundle.note_ids();
    rec.evidence_episode_ids = result.bundle.episode_ids();
    if (with_gpt_score) {
        try {
            auto resp = call_typed<GptScoreResponse>(
                *engine.context().provider,
                engine.context().request(
                    TaskTag::gpt_score,
                    build_gpt_score_prompt(q.question, q.answer, rec.predicted), q.question),
                parse_gpt_score_response);
            rec.gpt_score = resp.score;
        } catch (const EngineError& e) {
            log::warn("judge score unavailable for question: " + std::string{e.what()});
        }
    }
    return rec;
}

inline EvalReport run_eval(MemoryEngine& engine, const std::string& dataset_path,
                           Strategy strategy, int k, const EvalOptions& options) {
    auto questions = load_questions(dataset_path);
    EvalReport report;
    report.strategy = strategy;
    report.k = k;

    for (int trial = 0; trial < std::max(1, options.trials); ++trial) {
        EvalTrial t;
        t.records.resize(questions.size());
        int workers = std::max(1, options.parallel);
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= questions.size()) break;
                t.records[i] =
                    eval_one(engine, questions[i], strategy, k, options.with_gpt_score);
            }
        };
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        finalize_trial(t);
        report.trials.push_back(std::move(t));
    }

    if (!options.results_path.empty()) {
        std::ofstream out(options.results_path, std::ios::trunc);
        if (!out) throw io_error("cannot write results file: " + options.results_path);
        for (const auto& trial : report.trials)
            for (const auto& r : trial.records) out << json(r).dump() << "\n";
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report formatting

namespace eval_detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

} // namespace eval_detail

// Aligned text table, one row per category plus the overall row. With more
// than one trial, score cells become "mean (std)".
inline std::string format_report(const EvalReport& report) {
    static const QuestionCategory rows[] = {
        QuestionCategory::single_hop, QuestionCategory::multi_hop, QuestionCategory::temporal,
        QuestionCategory::open_domain, QuestionCategory::adversarial};

    bool any_gpt = false;
    for (const auto& t : report.trials)
        if (t.overall.mean_gpt_score) any_gpt = true;

    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "strategy=%s k=%d trials=%zu\n", to_string(report.strategy),
                  report.k, report.trials.size());
    out += line;
    std::snprintf(line, sizeof(line), "%-12s %6s %16s %s %14s %14s\n", "category", "n", "f1",
                  any_gpt ? "      gpt_score " : "", "latency_ms", "evidence_tok");
    out += line;

    auto collect = [&](QuestionCategory cat, bool overall) {
        std::vector<double> f1s, gpts, lats, toks;
        int n = 0;
        for (const auto& t : report.trials) {
            const Aggregate* a = nullptr;
            if (overall) {
                a = &t.overall;
            } else {
                auto it = t.by_category.find(cat);
                if (it != t.by_category.end()) a = &it->second;
            }
            if (!a || a->n == 0) continue;
            n = a->n;
            f1s.push_back(a->mean_f1);
            if (a->mean_gpt_score) gpts.push_back(*a->mean_gpt_score);
            lats.push_back(a->mean_latency_ms);
            toks.push_back(a->mean_evidence_tokens);
        }
        return std::make_tuple(n, f1s, gpts, lats, toks);
    };

    auto emit = [&](const char* name, QuestionCategory cat, bool overall) {
        auto [n, f1s, gpts, lats, toks] = collect(cat, overall);
        if (n == 0) return;
        auto [f1m, f1s_] = eval_detail::mean_std(f1s);
        auto [latm, lats_] = eval_detail::mean_std(lats);
        auto [tokm, toks_] = eval_detail::mean_std(toks);
        std::string f1_cell, gpt_cell;
        char buf[64];
        if (report.trials.size() > 1) {
            std::snprintf(buf, sizeof(buf), "%.4f (%.4f)", f1m, f1s_);
        } else {
            std::snprintf(buf, sizeof(buf), "%.4f", f1m);
        }
        f1_cell = buf;
        if (any_gpt && !gpts.empty()) {
            auto [gm, gs] = eval_detail::mean_std(gpts);
            if (report.trials.size() > 1)
                std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", gm, gs);
            else
                std::snprintf(buf, sizeof(buf), "%.2f", gm);
            gpt_cell = buf;
        }
        std::snprintf(line, sizeof(line), "%-12s %6d %16s %s%15.3f %14.1f\n", name, n,
                      f1_cell.c_str(), any_gpt ? (gpt_cell + " ").c_str() : "", latm, tokm);
        out += line;
    };

    for (auto cat : rows) emit(to_string(cat), cat, false);
    emit("overall", QuestionCategory::single_hop, true);
    int errors = 0;
    for (const auto& t : report.trials) errors += t.errors;
    if (errors > 0) {
        std::snprintf(line, sizeof(line), "(%d question(s) errored and were excluded)\n", errors);
        out += line;
    }
    return out;
}

inline json report_summary(const EvalReport& report) {
    json trials = json::array();
    for (const auto& t : report.trials) {
        json cats;
        for (const auto& [cat, a] : t.by_category) {
            json ja{{"n", a.n},
                    {"mean_f1", a.mean_f1},
                    {"mean_latency_ms", a.mean_latency_ms},
                    {"mean_evidence_tokens", a.mean_evidence_tokens}};
            if (a.mean_gpt_score) ja["mean_gpt_score"] = *a.mean_gpt_score;
            cats[to_string(cat)] = ja;
        }
        json overall{{"n", t.overall.n},
                     {"mean_f1", t.overall.mean_f1},
                     {"mean_latency_ms", t.overall.mean_latency_ms},
                     {"mean_evidence_tokens", t.overall.mean_evidence_tokens}};
        if (t.overall.mean_gpt_score) overall["mean_gpt_score"] = *t.overall.mean_gpt_score;
        trials.push_back({{"by_category", cats}, {"overall", overall}, {"errors", t.errors}});
    }
    return json{{"strategy", to_string(report.strategy)}, {"k", report.k}, {"trials", trials}};
}

} // namespace engram
