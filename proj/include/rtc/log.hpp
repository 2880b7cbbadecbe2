#pragma once

#include <ostream>
#include <string_view>

#include "json.hpp"

namespace rtc::log {

enum class level { debug, info, warn, error };

level parse_level(std::string_view s);

void set_level(level l);
level get_level();

// Defaults to std::cerr. Not owned.
void set_sink(std::ostream* out);

// One JSON object per line: {"ts":..,"level":..,"event":.., ...fields}.
void emit(level l, std::string_view event, nlohmann::json fields = {});

inline void debug(std::string_view e, nlohmann::json f = {}) {
  emit(level::debug, e, std::move(f));
}
inline void info(std::string_view e, nlohmann::json f = {}) {
  emit(level::info, e, std::move(f));
}
inline void warn(std::string_view e, nlohmann::json f = {}) {
  emit(level::warn, e, std::move(f));
}
inline void error(std::string_view e, nlohmann::json f = {}) {
  emit(level::error, e, std::move(f));
}

}  // namespace rtc::log
