#include "anomale/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace anomale::log {
namespace {

Level parse_env() {
  const char* env = std::getenv("ANOMALE_LOG_LEVEL");
  if (env == nullptr) return Level::warn;
  const std::string v(env);
  if (v == "debug") return Level::debug;
  if (v == "info") return Level::info;
  if (v == "warn") return Level::warn;
  if (v == "error") return Level::error;
  if (v == "off") return Level::off;
  return Level::warn;
}

std::atomic<Level>& current() {
  static std::atomic<Level> lvl{parse_env()};
  return lvl;
}

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: break;
  }
  return "";
}

}  // namespace

Level level() { return current().load(); }
void set_level(Level lvl) { current().store(lvl); }

void write(Level lvl, const std::string& msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[anomale:" << tag(lvl) << "] " << msg << '\n';
}

}  // namespace anomale::log
