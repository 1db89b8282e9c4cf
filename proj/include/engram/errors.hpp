#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace engram {

// Engine-wide error taxonomy. The wire API exposes a subset of these codes;
// parse/script/io collapse onto provider_unavailable/internal at that layer.
enum class ErrorCode {
    validation,
    conflict,
    immutability,
    stale_target,
    provider_unavailable,
    parse,
    script,
    io,
    internal,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::validation: return "validation";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::immutability: return "immutability";
        case ErrorCode::stale_target: return "stale_target";
        case ErrorCode::provider_unavailable: return "provider_unavailable";
        case ErrorCode::parse: return "parse";
        case ErrorCode::script: return "script";
        case ErrorCode::io: return "io";
        case ErrorCode::internal: return "internal";
    }
    return "internal";
}

class EngineError : public std::runtime_error {
public:
    EngineError(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline EngineError validation_error(const std::string& msg) { return {ErrorCode::validation, msg}; }
inline EngineError conflict_error(const std::string& msg) { return {ErrorCode::conflict, msg}; }
inline EngineError immutability_error(const std::string& msg) { return {ErrorCode::immutability, msg}; }
inline EngineError stale_target_error(const std::string& msg) { return {ErrorCode::stale_target, msg}; }
inline EngineError io_error(const std::string& msg) { return {ErrorCode::io, msg}; }
inline EngineError internal_error(const std::string& msg) { return {ErrorCode::internal, msg}; }

// Transport-level provider failure. Retryable by policy of the calling module.
class ProviderError : public EngineError {
public:
    explicit ProviderError(const std::string& msg, bool retryable = true)
        : EngineError(ErrorCode::provider_unavailable, msg), retryable_(retryable) {}

    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

// A provider response that does not match the task schema. Carries the raw
// text so callers can log it before applying their fallback.
class LlmParseError : public EngineError {
public:
    LlmParseError(const std::string& msg, std::string raw)
        : EngineError(ErrorCode::parse, msg), raw_(std::move(raw)) {}

    const std::string& raw_text() const { return raw_; }

private:
    std::string raw_;
};

// Raised by the scripted provider when a (task, key) pair has no entry.
// Deliberately loud: it signals a gap in a test fixture, never a soft default.
class ScriptKeyError : public EngineError {
public:
    explicit ScriptKeyError(const std::string& msg) : EngineError(ErrorCode::script, msg) {}
};

} // namespace engram
