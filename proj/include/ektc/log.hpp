#pragma once

#include <iostream>
#include <mutex>
#include <string_view>

namespace ektc {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Silent = 3 };

namespace detail {
inline LogLevel& log_threshold() {
    static LogLevel level = LogLevel::Warn;
    return level;
}
inline std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

inline void set_log_level(LogLevel level) { detail::log_threshold() = level; }

inline void log_line(LogLevel level, std::string_view tag, std::string_view msg) {
    if (level < detail::log_threshold()) return;
    std::lock_guard<std::mutex> lock(detail::log_mutex());
    std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void log_warn(std::string_view msg) { log_line(LogLevel::Warn, "warn", msg); }
inline void log_info(std::string_view msg) { log_line(LogLevel::Info, "info", msg); }
inline void log_debug(std::string_view msg) { log_line(LogLevel::Debug, "debug", msg); }

} // namespace ektc
