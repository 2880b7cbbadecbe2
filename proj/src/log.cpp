#include "rtc/log.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>

#include "rtc/error.hpp"

namespace rtc::log {

namespace {

std::atomic<level> g_level{level::info};
std::atomic<std::ostream*> g_sink{nullptr};
std::mutex g_mutex;

char const* to_string(level const l) {
  switch (l) {
    case level::debug: return "debug";
    case level::info: return "info";
    case level::warn: return "warn";
    case level::error: return "error";
  }
  return "info";
}

}  // namespace

level parse_level(std::string_view s) {
  if (s == "debug") return level::debug;
  if (s == "info") return level::info;
  if (s == "warn" || s == "warning") return level::warn;
  if (s == "error") return level::error;
  throw invalid_parameter{"unknown log level '" + std::string{s} + "'"};
}

void set_level(level const l) { g_level = l; }
level get_level() { return g_level; }
void set_sink(std::ostream* out) { g_sink = out; }

void emit(level const l, std::string_view event, nlohmann::json fields) {
  if (l < g_level.load()) {
    return;
  }
  auto const now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  auto line = nlohmann::json::object();
  line["ts"] = static_cast<double>(now) / 1000.0;
  line["level"] = to_string(l);
  line["event"] = event;
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) {
      line[k] = std::move(v);
    }
  }
  auto const text = line.dump(-1, ' ', false,
                              nlohmann::json::error_handler_t::replace);
  auto* sink = g_sink.load();
  auto const lock = std::scoped_lock{g_mutex};
  (sink == nullptr ? std::cerr : *sink) << text << '\n';
}

}  // namespace rtc::log
