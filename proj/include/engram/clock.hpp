#pragma once

#include <chrono>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace engram {

// All stored timestamps are UTC instants with second precision.
using Instant = std::chrono::sys_seconds;
using Duration = std::chrono::seconds;

inline Instant instant_from_unix(std::int64_t secs) {
    return Instant{std::chrono::seconds{secs}};
}

inline std::int64_t to_unix(Instant t) { return t.time_since_epoch().count(); }

// "2023-05-08T13:56:00Z"
inline std::string format_instant(Instant t) {
    using namespace std::chrono;
    auto days = floor<std::chrono::days>(t);
    year_month_day ymd{days};
    hh_mm_ss<seconds> tod{t - days};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ldZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<long>(tod.hours().count()),
                  static_cast<long>(tod.minutes().count()), static_cast<long>(tod.seconds().count()));
    return buf;
}

// Accepts "YYYY-MM-DDTHH:MM:SSZ" and the date-only form "YYYY-MM-DD".
inline std::optional<Instant> parse_instant(const std::string& s) {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
    if (s.size() >= 20 && std::sscanf(s.c_str(), "%d-%2u-%2uT%2u:%2u:%2u", &y, &mo, &d, &h, &mi, &se) == 6) {
        // fall through to validation
    } else if (s.size() == 10 && std::sscanf(s.c_str(), "%d-%2u-%2u", &y, &mo, &d) == 3) {
        h = mi = se = 0;
    } else {
        return std::nullopt;
    }
    year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 60) return std::nullopt;
    return Instant{sys_days{ymd} + hours{h} + minutes{mi} + seconds{se}};
}

inline std::string format_date(Instant t) {
    return format_instant(t).substr(0, 10);
}

class Clock {
public:
    virtual ~Clock() = default;
    virtual Instant now() const = 0;
};

class SystemClock final : public Clock {
public:
    Instant now() const override {
        return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
    }
};

// Manually advanced clock. Every deterministic pipeline run (tests, golden
// fixtures) pins one of these so two runs over the same input produce
// identical timestamps and, by extension, identical ids and stored bytes.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Instant start) : now_(start) {}

    Instant now() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        return now_;
    }

    void advance(Duration d) {
        std::lock_guard<std::mutex> lock(mutex_);
        now_ += d;
    }

    void set(Instant t) {
        std::lock_guard<std::mutex> lock(mutex_);
        now_ = t;
    }

private:
    mutable std::mutex mutex_;
    Instant now_;
};

using ClockPtr = std::shared_ptr<Clock>;

} // namespace engram
