#include "hintpose/common.hpp"

#include <cstdlib>
#include <cstring>

namespace hintpose {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("HINTPOSE_LOG");
        if (!env) return LogLevel::info;
        if (std::strcmp(env, "quiet") == 0 || std::strcmp(env, "0") == 0) return LogLevel::quiet;
        if (std::strcmp(env, "debug") == 0 || std::strcmp(env, "2") == 0) return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

}  // namespace hintpose
