#include "powertrace/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace powertrace {

namespace {

LogLevel parse_level() {
    const char* env = std::getenv("POWERTRACE_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    std::string v(env);
    if (v == "quiet" || v == "0") return LogLevel::kQuiet;
    if (v == "warn" || v == "1") return LogLevel::kWarn;
    if (v == "info" || v == "2") return LogLevel::kInfo;
    if (v == "debug" || v == "3") return LogLevel::kDebug;
    return LogLevel::kWarn;
}

std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}

void emit(const char* tag, const std::string& msg) {
    std::lock_guard<std::mutex> lock(log_mutex());
    std::fprintf(stderr, "[powertrace %s] %s\n", tag, msg.c_str());
}

} // namespace

LogLevel log_level() {
    static LogLevel level = parse_level();
    return level;
}

void log_warn(const std::string& msg) {
    if (log_level() >= LogLevel::kWarn) emit("warn", msg);
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::kInfo) emit("info", msg);
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::kDebug) emit("debug", msg);
}

} // namespace powertrace
