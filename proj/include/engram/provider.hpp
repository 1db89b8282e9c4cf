#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "json.hpp"

#include "engram/config.hpp"
#include "engram/errors.hpp"
#include "engram/text.hpp"

namespace engram {

// Every LLM-dependent judgment in the engine goes through one of these tags;
// the tag fixes the response schema the caller will parse.
enum class TaskTag {
    segment,
    extract_stage1,
    extract_stage2,
    normalize,
    judge_sufficiency,
    classify_relation,
    answer,
    gpt_score,
};

inline const char* to_string(TaskTag t) {
    switch (t) {
        case TaskTag::segment: return "segment";
        case TaskTag::extract_stage1: return "extract_stage1";
        case TaskTag::extract_stage2: return "extract_stage2";
        case TaskTag::normalize: return "normalize";
        case TaskTag::judge_sufficiency: return "judge_sufficiency";
        case TaskTag::classify_relation: return "classify_relation";
        case TaskTag::answer: return "answer";
        case TaskTag::gpt_score: return "gpt_score";
    }
    return "answer";
}

struct LlmRequest {
    TaskTag task_tag = TaskTag::answer;
    std::string prompt;
    // Resolution key for the scripted provider; other providers ignore it.
    // Callers derive it from the domain object (documented per call site).
    std::string script_key;
    double temperature = kDecodingTemperature;  // always 0.0
    std::int64_t max_output_tokens = 1024;
};

struct LlmUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    LlmUsage& operator+=(const LlmUsage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
};

struct LlmResult {
    std::string text;  // raw response; typed parsing happens in schemas.hpp
    LlmUsage usage;
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;

    // Throws ProviderError on transport failure and ScriptKeyError on a
    // scripted fixture gap. Schema violations are the caller's problem: the
    // raw text comes back as-is.
    virtual LlmResult complete(const LlmRequest& request) = 0;

    virtual std::string name() const = 0;
};

using LlmProviderPtr = std::shared_ptr<LlmProvider>;

// ---------------------------------------------------------------------------
// Usage accounting wrapper. Totals are monotone accumulators per run.

class UsageCountingProvider final : public LlmProvider {
public:
    explicit UsageCountingProvider(LlmProviderPtr inner) : inner_(std::move(inner)) {}

    LlmResult complete(const LlmRequest& request) override {
        LlmResult r = inner_->complete(request);
        prompt_tokens_ += r.usage.prompt_tokens;
        completion_tokens_ += r.usage.completion_tokens;
        ++calls_;
        return r;
    }

    std::string name() const override { return inner_->name(); }

    LlmUsage total() const { return {prompt_tokens_.load(), completion_tokens_.load()}; }
    std::int64_t call_count() const { return calls_.load(); }
    LlmProvider& inner() { return *inner_; }

private:
    LlmProviderPtr inner_;
    std::atomic<std::int64_t> prompt_tokens_{0};
    std::atomic<std::int64_t> completion_tokens_{0};
    std::atomic<std::int64_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Scripted provider: resolves (task_tag, script_key) to a canned JSON
// response. A missing key is a hard error; a silent default would let a test
// pass for the wrong reason.

class ScriptedProvider final : public LlmProvider {
public:
    ScriptedProvider() = default;

    static std::shared_ptr<ScriptedProvider> from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open script file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw validation_error(std::string{"script parse error: "} + e.what());
        }
        auto p = std::make_shared<ScriptedProvider>();
        for (const auto& entry : j.at("script")) {
            auto tag = tag_from_string(entry.at("task").get<std::string>());
            p->add(tag, entry.at("key").get<std::string>(), entry.at("response"));
        }
        return p;
    }

    void add(TaskTag tag, const std::string& key, nlohmann::json response) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = script_.try_emplace({tag, key}, std::move(response));
        if (!inserted) throw validation_error("duplicate script key: " + describe(tag, key));
    }

    // Replaces any existing entry; used by tests that respond to ids minted at runtime.
    void set(TaskTag tag, const std::string& key, nlohmann::json response) {
        std::lock_guard<std::mutex> lock(mutex_);
        script_[{tag, key}] = std::move(response);
    }

    LlmResult complete(const LlmRequest& request) override {
        std::lock_guard<std::mutex> lock(mutex_);
        ++calls_by_tag_[request.task_tag];
        auto it = script_.find({request.task_tag, request.script_key});
        if (it == script_.end())
            throw ScriptKeyError("no scripted response for " + describe(request.task_tag, request.script_key));
        LlmResult r;
        r.text = it->second.is_string() ? it->second.get<std::string>() : it->second.dump();
        r.usage.prompt_tokens = estimate_tokens(request.prompt);
        r.usage.completion_tokens = estimate_tokens(r.text);
        return r;
    }

    std::string name() const override { return "scripted"; }

    std::int64_t calls(TaskTag tag) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = calls_by_tag_.find(tag);
        return it == calls_by_tag_.end() ? 0 : it->second;
    }

private:
    static TaskTag tag_from_string(const std::string& s) {
        static const std::map<std::string, TaskTag> m = {
            {"segment", TaskTag::segment},
            {"extract_stage1", TaskTag::extract_stage1},
            {"extract_stage2", TaskTag::extract_stage2},
            {"normalize", TaskTag::normalize},
            {"judge_sufficiency", TaskTag::judge_sufficiency},
            {"classify_relation", TaskTag::classify_relation},
            {"answer", TaskTag::answer},
            {"gpt_score", TaskTag::gpt_score},
        };
        auto it = m.find(s);
        if (it == m.end()) throw validation_error("unknown task tag in script: " + s);
        return it->second;
    }

    static std::string describe(TaskTag tag, const std::string& key) {
        return std::string{"("} + to_string(tag) + ", \"" + key + "\")";
    }

    mutable std::mutex mutex_;
    std::map<std::pair<TaskTag, std::string>, nlohmann::json> script_;
    std::map<TaskTag, std::int64_t> calls_by_tag_;
};

} // namespace engram
