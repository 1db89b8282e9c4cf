#pragma once

#include <memory>
#include <random>

#include "engram/clock.hpp"
#include "engram/config.hpp"
#include "engram/embedding.hpp"
#include "engram/ids.hpp"
#include "engram/provider.hpp"
#include "engram/provider_heuristic.hpp"
#include "engram/provider_remote.hpp"

namespace engram {

// Shared plumbing threaded through every pipeline: configuration, the clock,
// the id generator, the embedder, and the LLM provider (always wrapped in
// the usage counter so token accounting is uniform).
struct EngineContext {
    Config config;
    ClockPtr clock;
    std::shared_ptr<IdGenerator> ids;
    EmbedderPtr embedder;
    std::shared_ptr<UsageCountingProvider> provider;

    static EngineContext from_config(Config config) {
        EngineContext ctx;
        ctx.clock = config.determinism.fixed_time
                        ? ClockPtr(std::make_shared<ManualClock>(*config.determinism.fixed_time))
                        : ClockPtr(std::make_shared<SystemClock>());
        std::uint64_t seed = config.determinism.seed;
        if (seed == 0) seed = std::random_device{}();
        ctx.ids = std::make_shared<IdGenerator>(ctx.clock, seed);

        if (config.embedding.kind == "hashing") {
            ctx.embedder = std::make_shared<HashingEmbedder>(config.embedding.dim);
        } else if (config.embedding.kind == "remote") {
            ctx.embedder = std::make_shared<RemoteEmbedder>(config.embedding);
        } else {
            throw validation_error("unknown embedding.kind: " + config.embedding.kind);
        }

        LlmProviderPtr inner;
        if (config.provider.kind == "heuristic") {
            inner = std::make_shared<HeuristicProvider>();
        } else if (config.provider.kind == "scripted") {
            if (config.provider.script_path.empty())
                throw validation_error("scripted provider requires provider.script_path");
            inner = ScriptedProvider::from_file(config.provider.script_path);
        } else if (config.provider.kind == "remote") {
            inner = std::make_shared<RemoteLlmProvider>(config.provider);
        } else {
            throw validation_error("unknown provider.kind: " + config.provider.kind);
        }
        ctx.provider = std::make_shared<UsageCountingProvider>(std::move(inner));
        ctx.config = std::move(config);
        return ctx;
    }

    // Test-oriented assembly with explicit parts.
    static EngineContext make(Config config, LlmProviderPtr provider, EmbedderPtr embedder,
                              ClockPtr clock, std::uint64_t seed = 42) {
        EngineContext ctx;
        ctx.config = std::move(config);
        ctx.clock = std::move(clock);
        ctx.ids = std::make_shared<IdGenerator>(ctx.clock, seed);
        ctx.embedder = std::move(embedder);
        ctx.provider = std::make_shared<UsageCountingProvider>(std::move(provider));
        return ctx;
    }

    LlmRequest request(TaskTag tag, std::string prompt, std::string key) const {
        LlmRequest r;
        r.task_tag = tag;
        r.prompt = std::move(prompt);
        r.script_key = std::move(key);
        r.max_output_tokens = config.task_budget(to_string(tag));
        return r;
    }
};

} // namespace engram
