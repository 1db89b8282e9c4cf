#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "engram/clock.hpp"
#include "engram/errors.hpp"

namespace engram {

// Decoding temperature is pinned for every internal call; judgments must be
// deterministic control signals, not samples.
inline constexpr double kDecodingTemperature = 0.0;

struct ProviderConfig {
    std::string kind = "heuristic";  // scripted | heuristic | remote
    std::string script_path;         // scripted: JSON script file
    std::string base_url;            // remote: chat-completions style endpoint
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "ENGRAM_API_KEY";
    // Output budgets per task; "answer" defaults high, control tasks stay small.
    std::map<std::string, std::int64_t> task_budgets = {
        {"segment", 1024},        {"extract_stage1", 1024}, {"extract_stage2", 1024},
        {"normalize", 1024},      {"judge_sufficiency", 64}, {"classify_relation", 256},
        {"answer", 8192},         {"gpt_score", 64},
    };
};

struct EmbeddingConfig {
    std::string kind = "hashing";  // hashing | remote
    std::size_t dim = 768;
    std::string base_url;
    std::string model = "all-mpnet-base-v2";
    std::string api_key_env = "ENGRAM_API_KEY";
};

struct RetrievalConfig {
    int k = 10;
    double fusion_vector_weight = 0.7;
    double fusion_lexical_weight = 0.3;
    std::int64_t snippet_token_budget = 300;  // per hit, in the judge prompt
};

struct ConstructionConfig {
    double dedup_threshold = 0.95;  // cosine at or above which candidates merge
    int fallback_window = 10;       // fixed-window segmentation when the provider fails
    bool align_episodes = false;    // episodes keep raw turn text by default
    std::size_t episode_embed_tokens = 512;
};

struct EvolutionConfig {
    int neighbor_k = 5;          // nearest active notes considered per candidate
    double cosine_floor = 0.3;   // below this, a candidate is independent outright
    bool synchronous_triggers = true;
};

struct ServiceConfig {
    int port = 8080;
    std::string host = "0.0.0.0";
    std::string bearer_token;  // empty disables auth
};

struct DeterminismConfig {
    std::optional<Instant> fixed_time;  // pin the clock for reproducible runs
    std::uint64_t seed = 0;             // 0 means seed from the system
};

struct Config {
    std::string storage_path = "engram-data";
    ProviderConfig provider;
    EmbeddingConfig embedding;
    RetrievalConfig retrieval;
    ConstructionConfig construction;
    EvolutionConfig evolution;
    ServiceConfig service;
    DeterminismConfig determinism;

    std::int64_t task_budget(const std::string& tag) const {
        auto it = provider.task_budgets.find(tag);
        return it == provider.task_budgets.end() ? 1024 : it->second;
    }
};

inline Config config_from_json(const nlohmann::json& j) {
    Config c;
    if (j.contains("storage")) c.storage_path = j["storage"].value("path", c.storage_path);
    if (j.contains("provider")) {
        const auto& p = j["provider"];
        c.provider.kind = p.value("kind", c.provider.kind);
        c.provider.script_path = p.value("script_path", c.provider.script_path);
        c.provider.base_url = p.value("base_url", c.provider.base_url);
        c.provider.model = p.value("model", c.provider.model);
        c.provider.api_key_env = p.value("api_key_env", c.provider.api_key_env);
        if (p.contains("task_budgets"))
            for (auto& [k, v] : p["task_budgets"].items())
                c.provider.task_budgets[k] = v.get<std::int64_t>();
    }
    if (j.contains("embedding")) {
        const auto& e = j["embedding"];
        c.embedding.kind = e.value("kind", c.embedding.kind);
        c.embedding.dim = e.value("dim", c.embedding.dim);
        c.embedding.base_url = e.value("base_url", c.embedding.base_url);
        c.embedding.model = e.value("model", c.embedding.model);
        c.embedding.api_key_env = e.value("api_key_env", c.embedding.api_key_env);
    }
    if (j.contains("retrieval")) {
        const auto& r = j["retrieval"];
        c.retrieval.k = r.value("k", c.retrieval.k);
        c.retrieval.fusion_vector_weight = r.value("fusion_vector_weight", c.retrieval.fusion_vector_weight);
        c.retrieval.fusion_lexical_weight = r.value("fusion_lexical_weight", c.retrieval.fusion_lexical_weight);
        c.retrieval.snippet_token_budget = r.value("snippet_token_budget", c.retrieval.snippet_token_budget);
    }
    if (j.contains("construction")) {
        const auto& b = j["construction"];
        c.construction.dedup_threshold = b.value("dedup_threshold", c.construction.dedup_threshold);
        c.construction.fallback_window = b.value("fallback_window", c.construction.fallback_window);
        c.construction.align_episodes = b.value("align_episodes", c.construction.align_episodes);
        c.construction.episode_embed_tokens = b.value("episode_embed_tokens", c.construction.episode_embed_tokens);
    }
    if (j.contains("evolution")) {
        const auto& e = j["evolution"];
        c.evolution.neighbor_k = e.value("neighbor_k", c.evolution.neighbor_k);
        c.evolution.cosine_floor = e.value("cosine_floor", c.evolution.cosine_floor);
        c.evolution.synchronous_triggers = e.value("synchronous_triggers", c.evolution.synchronous_triggers);
    }
    if (j.contains("service")) {
        const auto& s = j["service"];
        c.service.port = s.value("port", c.service.port);
        c.service.host = s.value("host", c.service.host);
        c.service.bearer_token = s.value("bearer_token", c.service.bearer_token);
    }
    if (j.contains("determinism")) {
        const auto& d = j["determinism"];
        if (d.contains("fixed_time")) {
            auto t = parse_instant(d["fixed_time"].get<std::string>());
            if (!t) throw validation_error("determinism.fixed_time must be an ISO instant");
            c.determinism.fixed_time = *t;
        }
        c.determinism.seed = d.value("seed", c.determinism.seed);
    }
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string{"config parse error: "} + e.what());
    }
    return config_from_json(j);
}

} // namespace engram
