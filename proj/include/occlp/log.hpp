#pragma once

#include <string>

namespace occlp {

enum class LogLevel { Quiet = 0, Error = 1, Warn = 2, Info = 3, Debug = 4 };

// Read once from OCCLP_LOG (quiet|error|warn|info|debug, or 0-4); default warn.
LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& message);

inline void log_info(const std::string& m) { log_message(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::Debug, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::Warn, m); }

}  // namespace occlp
