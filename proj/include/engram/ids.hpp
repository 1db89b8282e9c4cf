#pragma once

#include <cstdint>
#include <cstdio>
#include <mutex>
#include <random>
#include <string>

#include "engram/clock.hpp"

namespace engram {

enum class EntityKind { episode, note, op };

inline const char* kind_tag(EntityKind k) {
    switch (k) {
        case EntityKind::episode: return "ep";
        case EntityKind::note: return "nt";
        case EntityKind::op: return "op";
    }
    return "xx";
}

// Time-prefixed random identifiers: 16 hex digits of unix seconds*1e6 plus a
// monotonic sequence, a kind tag, and 8 hex digits of generator randomness.
// Fixed-width fields make plain string order equal creation order, and the
// random suffix keeps fresh ids disjoint from anything persisted by an
// earlier process.
class IdGenerator {
public:
    IdGenerator(ClockPtr clock, std::uint64_t seed)
        : clock_(std::move(clock)), rng_(seed) {}

    std::string next(EntityKind kind) {
        std::lock_guard<std::mutex> lock(mutex_);
        std::uint64_t micros =
            static_cast<std::uint64_t>(to_unix(clock_->now())) * 1000000ull;
        if (micros <= last_micros_) {
            if (seq_ == 0xffff) {
                // seq field exhausted within one clock tick; borrow a microsecond
                ++last_micros_;
                seq_ = 0;
            } else {
                ++seq_;
            }
            micros = last_micros_;
        } else {
            last_micros_ = micros;
            seq_ = 0;
        }
        std::uint32_t rand_bits = static_cast<std::uint32_t>(rng_());
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%016llx%04x-%s-%08x",
                      static_cast<unsigned long long>(micros),
                      static_cast<unsigned>(seq_ & 0xffff), kind_tag(kind), rand_bits);
        return buf;
    }

private:
    std::mutex mutex_;
    ClockPtr clock_;
    std::mt19937_64 rng_;
    std::uint64_t last_micros_ = 0;
    std::uint32_t seq_ = 0;
};

} // namespace engram
