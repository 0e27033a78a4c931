#include "occlp/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace occlp {

namespace {

LogLevel parse_level(const char* text) {
  if (text == nullptr) return LogLevel::Warn;
  const std::string s(text);
  if (s == "quiet" || s == "0") return LogLevel::Quiet;
  if (s == "error" || s == "1") return LogLevel::Error;
  if (s == "warn" || s == "2") return LogLevel::Warn;
  if (s == "info" || s == "3") return LogLevel::Info;
  if (s == "debug" || s == "4") return LogLevel::Debug;
  return LogLevel::Warn;
}

std::atomic<int>& level_storage() {
  static std::atomic<int> level{static_cast<int>(parse_level(std::getenv("OCCLP_LOG")))};
  return level;
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_storage().load()); }

void set_log_level(LogLevel level) { level_storage().store(static_cast<int>(level)); }

void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > level_storage().load()) return;
  static std::mutex mu;
  static const char* names[] = {"", "error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[occlp " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace occlp
