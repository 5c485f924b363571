#pragma once

#include <sstream>
#include <string>

namespace anomale::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

/// Current threshold. Initialised from ANOMALE_LOG_LEVEL (debug|info|warn|error|off),
/// default warn.
Level level();
void set_level(Level lvl);
void write(Level lvl, const std::string& msg);

template <typename... Args>
void emit(Level lvl, const Args&... args) {
  if (lvl < level()) return;
  std::ostringstream os;
  (os << ... << args);
  write(lvl, os.str());
}

template <typename... Args>
void debug(const Args&... args) { emit(Level::debug, args...); }
template <typename... Args>
void info(const Args&... args) { emit(Level::info, args...); }
template <typename... Args>
void warn(const Args&... args) { emit(Level::warn, args...); }
template <typename... Args>
void error(const Args&... args) { emit(Level::error, args...); }

}  // namespace anomale::log
