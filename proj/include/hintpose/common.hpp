#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace hintpose {

// Error taxonomy shared by all modules. The CLI maps these to exit codes:
// config/usage -> 1, data -> 2, numeric -> 3.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Verbosity from the HINTPOSE_LOG env var: "quiet", "info" (default), "debug".
enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level();

template <typename... Args>
void log_info(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::info) {
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::debug) {
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

}  // namespace hintpose
