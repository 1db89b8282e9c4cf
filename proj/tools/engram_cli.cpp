// engram command line: ingest dialogue logs, build memory, query it, inspect
// the stores, run maintenance, serve the HTTP API, and run the eval harness.
// Exit codes: 0 success, 1 validation/usage error, 2 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "engram/engine.hpp"
#include "engram/eval.hpp"
#include "engram/locomo.hpp"
#include "engram/service.hpp"

namespace {

using namespace engram;

int exit_code_for(const EngineError& e) {
    switch (e.code()) {
        case ErrorCode::validation:
        case ErrorCode::conflict:
        case ErrorCode::immutability:
        case ErrorCode::stale_target:
            return 1;
        default:
            return 2;
    }
}

Config load_or_default(const std::string& config_path) {
    if (config_path.empty()) return Config{};
    return load_config(config_path);
}

std::unique_ptr<MemoryEngine> make_engine(const std::string& config_path) {
    return std::make_unique<MemoryEngine>(EngineContext::from_config(load_or_default(config_path)));
}

int cmd_ingest(const std::string& config_path, const std::string& file, const std::string& user) {
    auto engine = make_engine(config_path);
    std::ifstream in(file);
    if (!in) throw io_error("cannot open ingest file: " + file);
    std::map<std::string, std::vector<DialogueTurn>> by_session;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto turn = engine->parse_ingest_record(json::parse(line));
            by_session[turn.session_id].push_back(std::move(turn));
        } catch (const json::exception& e) {
            throw validation_error(file + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const EngineError& e) {
            throw EngineError(e.code(),
                              file + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (by_session.empty()) throw validation_error("ingest file has no turn records");
    for (auto& [session, turns] : by_session) {
        std::sort(turns.begin(), turns.end(),
                  [](const DialogueTurn& a, const DialogueTurn& b) {
                      return a.turn_index < b.turn_index;
                  });
        engine->stage_turns(user, session, turns);
        std::cout << "staged " << turns.size() << " turn(s) for session " << session << "\n";
    }
    return 0;
}

int cmd_build(const std::string& config_path, const std::string& user, const std::string& session) {
    auto engine = make_engine(config_path);
    auto report = engine->build(user, session);
    engine->flush();
    std::cout << json(report).dump(2) << "\n";
    return 0;
}

int cmd_query(const std::string& config_path, const std::string& user, const std::string& text,
              const std::string& strategy_name, int k, bool with_answer) {
    auto strategy = strategy_from_string(strategy_name);
    if (!strategy) throw validation_error("strategy must be hybrid or best-effort");
    auto engine = make_engine(config_path);
    auto result = engine->query(user, text, *strategy, k, with_answer);
    engine->flush();
    std::cout << json(result).dump(2) << "\n";
    return 0;
}

int cmd_notes(const std::string& config_path, const std::string& user, const std::string& status) {
    std::optional<NoteStatus> filter = NoteStatus::active;
    if (status == "all") filter = std::nullopt;
    else if (status == "tombstoned") filter = NoteStatus::tombstoned;
    else if (status != "active") throw validation_error("status must be active|tombstoned|all");
    auto engine = make_engine(config_path);
    for (const auto& n : engine->notes(user, filter)) std::cout << json(n).dump() << "\n";
    return 0;
}

int cmd_episodes(const std::string& config_path, const std::string& user) {
    auto engine = make_engine(config_path);
    for (const auto& e : engine->episodes(user)) std::cout << json(e).dump() << "\n";
    return 0;
}

int cmd_ops(const std::string& config_path, const std::string& user) {
    auto engine = make_engine(config_path);
    for (const auto& op : engine->ops(user)) std::cout << json(op).dump() << "\n";
    return 0;
}

int cmd_forget(const std::string& config_path, const std::string& user, std::int64_t min_usage,
               double min_age_days) {
    if (min_age_days < 0) throw validation_error("min-age-days must be >= 0");
    auto engine = make_engine(config_path);
    ForgettingPolicy policy;
    policy.min_usage = min_usage;
    policy.min_age = std::chrono::seconds{static_cast<std::int64_t>(min_age_days * 86400.0)};
    auto ids = engine->forget(user, policy);
    engine->flush();
    std::cout << json{{"tombstoned", ids}}.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& dataset,
             const std::string& strategy_name, int k, const std::string& k_sweep, int trials,
             int parallel, const std::string& out_path, const std::string& summary_path) {
    auto strategy = strategy_from_string(strategy_name);
    if (!strategy) throw validation_error("strategy must be hybrid or best-effort");
    auto engine = make_engine(config_path);
    EvalOptions options;
    options.trials = trials;
    options.parallel = parallel;
    options.results_path = out_path;
    options.with_gpt_score = engine->context().config.provider.kind == "remote";

    std::vector<int> ks;
    if (!k_sweep.empty()) {
        std::stringstream ss(k_sweep);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!trim(item).empty()) ks.push_back(std::stoi(trim(item)));
        if (ks.empty()) throw validation_error("empty --k-sweep list");
    } else {
        ks.push_back(k);
    }

    json sweep_summaries = json::array();
    for (int kv : ks) {
        auto report = run_eval(*engine, dataset, *strategy, kv, options);
        std::cout << format_report(report);
        sweep_summaries.push_back(report_summary(report));
    }
    engine->flush();
    if (!summary_path.empty()) {
        std::ofstream out(summary_path, std::ios::trunc);
        if (!out) throw io_error("cannot write summary: " + summary_path);
        out << (sweep_summaries.size() == 1 ? sweep_summaries[0] : sweep_summaries).dump(2)
            << "\n";
    }
    return 0;
}

int cmd_serve(const std::string& config_path, int port_override) {
    Config config = load_or_default(config_path);
    if (port_override > 0) config.service.port = port_override;
    auto engine = std::make_shared<MemoryEngine>(EngineContext::from_config(config));
    MemoryService service(engine, config.service);
    std::cout << "listening on " << config.service.host << ":" << config.service.port << "\n";
    if (!service.serve()) {
        std::cerr << "failed to bind " << config.service.host << ":" << config.service.port
                  << "\n";
        return 2;
    }
    return 0;
}

int cmd_adapt_locomo(const std::string& file, const std::string& out_dir) {
    auto result = adapt_locomo(file, out_dir);
    std::cout << "conversations: " << result.conversation_ids.size()
              << " sessions: " << result.sessions << " turns: " << result.turns
              << " questions: " << result.questions << "\n"
              << "questions file: " << result.questions_file << "\n";
    for (const auto& f : result.session_files) std::cout << "session file: " << f << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"engram: hierarchical long-term memory engine for conversational agents"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "path to a JSON config file");

    std::string file, user, session, text, status{"active"}, out_dir;
    std::string strategy{"hybrid"}, k_sweep, out_path, summary_path;
    int k = Config{}.retrieval.k;
    int trials = 1, parallel = 1, port = 0;
    std::int64_t min_usage = 0;
    double min_age_days = 0.0;
    bool with_answer = false;

    auto* ingest = app.add_subcommand("ingest", "stage a line-delimited session file");
    ingest->add_option("file", file)->required();
    ingest->add_option("--user", user, "user the sessions belong to")->required();

    auto* build = app.add_subcommand("build", "build memory from a staged session");
    build->add_option("user", user)->required();
    build->add_option("session", session)->required();

    auto* query = app.add_subcommand("query", "retrieve evidence for a query");
    query->add_option("user", user)->required();
    query->add_option("text", text)->required();
    query->add_option("--strategy", strategy, "hybrid or best-effort");
    query->add_option("--k", k, "top-k per layer");
    query->add_flag("--answer", with_answer, "also generate an answer");

    auto* notes = app.add_subcommand("notes", "list notes");
    notes->add_option("user", user)->required();
    notes->add_option("--status", status, "active|tombstoned|all");

    auto* episodes = app.add_subcommand("episodes", "list episodes");
    episodes->add_option("user", user)->required();

    auto* ops = app.add_subcommand("ops", "list the operation log");
    ops->add_option("user", user)->required();

    auto* forget = app.add_subcommand("forget", "tombstone low-usage old notes");
    forget->add_option("user", user)->required();
    forget->add_option("--min-usage", min_usage, "usage threshold");
    forget->add_option("--min-age-days", min_age_days, "minimum age in days");

    auto* eval = app.add_subcommand("eval", "run the evaluation harness");
    eval->add_option("dataset", file)->required();
    eval->add_option("--strategy", strategy, "hybrid or best-effort");
    eval->add_option("--k", k, "top-k per layer");
    eval->add_option("--k-sweep", k_sweep, "comma-separated k values, one report per k");
    eval->add_option("--trials", trials, "repeated trials (mean/std reporting)");
    eval->add_option("--parallel", parallel, "concurrent questions");
    eval->add_option("--out", out_path, "per-question results file (JSONL)");
    eval->add_option("--summary", summary_path, "machine-readable summary file");

    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    serve->add_option("--port", port, "override config port");

    auto* adapt = app.add_subcommand("adapt-locomo", "convert a LoCoMo file to engine formats");
    adapt->add_option("file", file)->required();
    adapt->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(config_path, file, user);
        if (build->parsed()) return cmd_build(config_path, user, session);
        if (query->parsed()) return cmd_query(config_path, user, text, strategy, k, with_answer);
        if (notes->parsed()) return cmd_notes(config_path, user, status);
        if (episodes->parsed()) return cmd_episodes(config_path, user);
        if (ops->parsed()) return cmd_ops(config_path, user);
        if (forget->parsed()) return cmd_forget(config_path, user, min_usage, min_age_days);
        if (eval->parsed())
            return cmd_eval(config_path, file, strategy, k, k_sweep, trials, parallel, out_path,
                            summary_path);
        if (serve->parsed()) return cmd_serve(config_path, port);
        if (adapt->parsed()) return cmd_adapt_locomo(file, out_dir);
    } catch (const engram::EngineError& e) {
        std::cerr << "error (" << engram::to_string(e.code()) << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
