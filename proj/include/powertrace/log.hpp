#pragma once

#include <string>

namespace powertrace {

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity comes from the POWERTRACE_LOG environment variable
// (quiet|warn|info|debug). Default is warn. Messages go to stderr so
// command output stays clean.
LogLevel log_level();

void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

} // namespace powertrace
