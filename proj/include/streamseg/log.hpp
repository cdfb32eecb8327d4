#pragma once

// Tiny stderr logger. Level comes from STREAMSEG_LOG (error, warn, info,
// debug); default warn. Not synchronized beyond the single write call.

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <sstream>
#include <string>

namespace streamseg {

enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_threshold() {
    static const LogLevel lvl = [] {
        const char* e = std::getenv("STREAMSEG_LOG");
        if (!e) return LogLevel::Warn;
        if (!std::strcmp(e, "error")) return LogLevel::Error;
        if (!std::strcmp(e, "warn")) return LogLevel::Warn;
        if (!std::strcmp(e, "info")) return LogLevel::Info;
        if (!std::strcmp(e, "debug")) return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return lvl;
}

inline void log_line(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(log_threshold())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::ostringstream os;
    os << "[" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
    std::cerr << os.str();
}

#define STREAMSEG_LOG_AT(lvl, expr)                                     \
    do {                                                                \
        if (static_cast<int>(lvl) <=                                    \
            static_cast<int>(::streamseg::log_threshold())) {           \
            std::ostringstream os_;                                     \
            os_ << expr;                                                \
            ::streamseg::log_line(lvl, os_.str());                      \
        }                                                               \
    } while (0)

#define LOG_ERROR(expr) STREAMSEG_LOG_AT(::streamseg::LogLevel::Error, expr)
#define LOG_WARN(expr) STREAMSEG_LOG_AT(::streamseg::LogLevel::Warn, expr)
#define LOG_INFO(expr) STREAMSEG_LOG_AT(::streamseg::LogLevel::Info, expr)
#define LOG_DEBUG(expr) STREAMSEG_LOG_AT(::streamseg::LogLevel::Debug, expr)

}  // namespace streamseg
