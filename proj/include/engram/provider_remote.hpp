#pragma once

// Chat-completions style remote provider. Request/response bodies follow the
// de facto standard schema; the base URL, model, and API key env var come
// from config. Structured-output parsing stays in schemas.hpp, so this file
// is transport only.

#include <cstdlib>
#include <memory>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "engram/embedding.hpp"
#include "engram/errors.hpp"
#include "engram/provider.hpp"

namespace engram {

namespace detail {
// "https://api.example.com/v1" -> ("https://api.example.com", "/v1")
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string path = base_url.substr(path_start);
    if (!path.empty() && path.back() == '/') path.pop_back();
    return {base_url.substr(0, path_start), path};
}

inline std::string api_key_from_env(const std::string& env_name) {
    const char* v = std::getenv(env_name.c_str());
    return v ? v : "";
}
} // namespace detail

class RemoteLlmProvider final : public LlmProvider {
public:
    explicit RemoteLlmProvider(ProviderConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty())
            throw validation_error("remote provider requires provider.base_url");
        auto [host, path] = detail::split_base_url(config_.base_url);
        host_ = host;
        path_prefix_ = path;
    }

    LlmResult complete(const LlmRequest& request) override {
        nlohmann::json body{
            {"model", config_.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens},
        };
        httplib::Client client(host_);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        std::string key = detail::api_key_from_env(config_.api_key_env);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res)
            throw ProviderError("llm transport failure: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw ProviderError("llm endpoint returned status " + std::to_string(res->status),
                                res->status >= 500 || res->status == 429);
        try {
            auto j = nlohmann::json::parse(res->body);
            LlmResult out;
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                out.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
                out.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
            }
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string{"llm response envelope malformed: "} + e.what(), false);
        }
    }

    std::string name() const override { return "remote:" + config_.model; }

private:
    ProviderConfig config_;
    std::string host_;
    std::string path_prefix_;
};

class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbeddingConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty())
            throw validation_error("remote embedder requires embedding.base_url");
        auto [host, path] = detail::split_base_url(config_.base_url);
        host_ = host;
        path_prefix_ = path;
    }

    EmbeddingVector embed(const std::string& text) override {
        if (trim(text).empty()) throw validation_error("cannot embed empty text");
        nlohmann::json body{{"model", config_.model}, {"input", nlohmann::json::array({text})}};
        httplib::Client client(host_);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        std::string key = detail::api_key_from_env(config_.api_key_env);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        auto res = client.Post(path_prefix_ + "/embeddings", headers, body.dump(), "application/json");
        if (!res)
            throw ProviderError("embedding transport failure: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw ProviderError("embedding endpoint returned status " + std::to_string(res->status),
                                res->status >= 500 || res->status == 429);
        try {
            auto j = nlohmann::json::parse(res->body);
            auto v = j.at("data").at(0).at("embedding").get<EmbeddingVector>();
            l2_normalize(v);
            return v;
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string{"embedding response malformed: "} + e.what(), false);
        }
    }

    std::size_t dimension() const override { return config_.dim; }

private:
    EmbeddingConfig config_;
    std::string host_;
    std::string path_prefix_;
};

} // namespace engram
