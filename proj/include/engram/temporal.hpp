#pragma once

// Temporal grounding of relative expressions against an episode's reference
// instant. Recognized forms: today / yesterday / tomorrow, "last|next
// <weekday>", "last|next week|month|year", and "<n> day(s) ago". The
// absolute ISO date is appended in parentheses after the expression; text
// already carrying such an annotation is left alone so the rewrite is
// idempotent. Anything unrecognized passes through untouched.

#include <chrono>
#include <optional>
#include <regex>
#include <string>

#include "engram/clock.hpp"
#include "engram/text.hpp"

namespace engram {

namespace temporal_detail {

using days_t = std::chrono::sys_days;

inline std::optional<unsigned> weekday_index(const std::string& lower) {
    static const char* names[] = {"sunday", "monday",   "tuesday", "wednesday",
                                  "thursday", "friday", "saturday"};
    for (unsigned i = 0; i < 7; ++i)
        if (lower == names[i]) return i;
    return std::nullopt;
}

inline days_t shift_month(days_t base, int delta) {
    using namespace std::chrono;
    year_month_day ymd{base};
    year_month ym = ymd.year() / ymd.month();
    ym += months{delta};
    year_month_day shifted{ym / ymd.day()};
    if (!shifted.ok()) shifted = ym / last;  // clamp to month length
    return sys_days{shifted};
}

inline days_t shift_year(days_t base, int delta) {
    using namespace std::chrono;
    year_month_day ymd{base};
    year_month_day shifted{ymd.year() + years{delta}, ymd.month(), ymd.day()};
    if (!shifted.ok()) shifted = shifted.year() / shifted.month() / last;  // Feb 29 clamp
    return sys_days{shifted};
}

inline days_t shift_weekday(days_t base, unsigned target, bool forward) {
    using namespace std::chrono;
    unsigned w = weekday{base}.c_encoding();
    if (forward) {
        unsigned delta = (target + 7 - w - 1) % 7 + 1;  // 1..7 strictly ahead
        return base + days{delta};
    }
    unsigned delta = (w + 7 - target - 1) % 7 + 1;  // 1..7 strictly back
    return base - days{delta};
}

inline std::string iso_date(days_t d) {
    using namespace std::chrono;
    year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

// True when the text right after `pos` already looks like " (YYYY-",
// meaning a previous pass annotated this expression.
inline bool already_annotated(const std::string& text, std::size_t pos) {
    std::size_t i = pos;
    if (i < text.size() && text[i] == ' ') ++i;
    if (i >= text.size() || text[i] != '(') return false;
    ++i;
    for (int d = 0; d < 4; ++d, ++i)
        if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    return i < text.size() && text[i] == '-';
}

} // namespace temporal_detail

inline std::string normalize_temporal(const std::string& text, Instant reference) {
    using namespace temporal_detail;
    static const std::regex pattern(
        R"((\b\d+\s+days?\s+ago\b)|(\b(last|next)\s+(monday|tuesday|wednesday|thursday|friday|saturday|sunday)\b)|(\b(last|next)\s+(week|month|year)\b)|(\btoday\b|\byesterday\b|\btomorrow\b))",
        std::regex::icase);

    days_t base = std::chrono::floor<std::chrono::days>(reference);
    std::string out;
    out.reserve(text.size() + 16);
    std::size_t consumed = 0;

    auto begin = std::sregex_iterator(text.begin(), text.end(), pattern);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const std::smatch& m = *it;
        std::size_t match_pos = static_cast<std::size_t>(m.position(0));
        std::size_t match_end = match_pos + static_cast<std::size_t>(m.length(0));
        std::string phrase = m.str(0);
        std::string lower = to_lower(phrase);

        std::optional<days_t> resolved;
        if (m[1].matched) {
            long n = std::strtol(lower.c_str(), nullptr, 10);
            if (n >= 0 && n <= 365000) resolved = base - std::chrono::days{n};
        } else if (m[2].matched) {
            bool forward = lower.rfind("next", 0) == 0;
            auto day_name = trim(lower.substr(4));
            if (auto idx = weekday_index(day_name)) resolved = shift_weekday(base, *idx, forward);
        } else if (m[5].matched) {
            bool forward = lower.rfind("next", 0) == 0;
            auto unit = trim(lower.substr(4));
            if (unit == "week") resolved = forward ? base + std::chrono::days{7} : base - std::chrono::days{7};
            else if (unit == "month") resolved = shift_month(base, forward ? 1 : -1);
            else resolved = shift_year(base, forward ? 1 : -1);
        } else if (m[8].matched) {
            if (lower == "today") resolved = base;
            else if (lower == "yesterday") resolved = base - std::chrono::days{1};
            else resolved = base + std::chrono::days{1};
        }

        out += text.substr(consumed, match_pos - consumed);
        out += phrase;
        if (resolved && !already_annotated(text, match_end)) {
            out += " (" + iso_date(*resolved) + ")";
        }
        consumed = match_end;
    }
    out += text.substr(consumed);
    return out;
}

} // namespace engram
