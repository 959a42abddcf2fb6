#pragma once

// Diagnostics on standard error, level from ISBA_LOG = quiet | info | debug.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>

namespace isba::log {

enum class Level { quiet = 0, info = 1, debug = 2 };

inline Level level_from_env() {
  const char* env = std::getenv("ISBA_LOG");
  if (!env) return Level::info;
  const std::string_view v(env);
  if (v == "quiet") return Level::quiet;
  if (v == "debug") return Level::debug;
  return Level::info;
}

inline Level& current_level() {
  static Level level = level_from_env();
  return level;
}

template <class... Args>
void write(Level at, const char* tag, Args&&... args) {
  if (static_cast<int>(current_level()) < static_cast<int>(at)) return;
  std::ostringstream line;
  line << "[isba " << tag << "] ";
  (line << ... << args);
  line << '\n';
  std::cerr << line.str();
}

template <class... Args>
void info(Args&&... args) { write(Level::info, "info", std::forward<Args>(args)...); }

template <class... Args>
void debug(Args&&... args) { write(Level::debug, "debug", std::forward<Args>(args)...); }

}  // namespace isba::log
