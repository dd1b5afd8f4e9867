#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace amber {

// Verbosity comes from the AMBER_LOG env var: quiet | warn | info | debug.
enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* raw = std::getenv("AMBER_LOG");
        const std::string_view v = raw ? raw : "warn";
        if (v == "quiet") return LogLevel::quiet;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

inline void log_warn(const std::string& msg) {
    if (log_level() >= LogLevel::warn) std::cerr << "[warn] " << msg << '\n';
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "[info] " << msg << '\n';
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) std::cerr << "[debug] " << msg << '\n';
}

} // namespace amber
