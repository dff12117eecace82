#include "predis/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace predis::log {

namespace {
std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;
constexpr const char* kNames[] = {"debug", "info", "warn", "error", "off"};
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, std::string_view component, std::string_view message) {
  if (lvl < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[" << kNames[static_cast<int>(lvl)] << "] " << component << ": " << message << '\n';
}

}  // namespace predis::log
