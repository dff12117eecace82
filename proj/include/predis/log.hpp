#pragma once

#include <string_view>

namespace predis::log {

enum class Level { kDebug, kInfo, kWarn, kError, kOff };

void set_level(Level level);
Level level();

void write(Level level, std::string_view component, std::string_view message);

inline void info(std::string_view component, std::string_view message) { write(Level::kInfo, component, message); }
inline void warn(std::string_view component, std::string_view message) { write(Level::kWarn, component, message); }
inline void error(std::string_view component, std::string_view message) { write(Level::kError, component, message); }

}  // namespace predis::log
