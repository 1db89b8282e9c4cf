#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace engram::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline Level& threshold() {
    static Level level = Level::warn;
    return level;
}

inline std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

inline void emit(Level level, const std::string& msg) {
    if (level < threshold()) return;
    static const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
    std::lock_guard<std::mutex> lock(sink_mutex());
    std::cerr << "[engram " << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline void debug(const std::string& msg) { emit(Level::debug, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void error(const std::string& msg) { emit(Level::error, msg); }

} // namespace engram::log
