#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>

#include "rtc/time.hpp"

namespace rtc {

struct retry_policy {
  int max_attempts_{3};
  std::chrono::milliseconds backoff_base_{1000};
};

enum class api_key_placement { query, header };

struct archiver_config {
  std::string rt_feed_url_;
  std::string timetable_url_;
  std::chrono::seconds poll_interval_{30};
  std::filesystem::path archive_root_;
  std::optional<std::string> api_key_;
  std::string api_key_name_{"api_key"};
  api_key_placement api_key_placement_{api_key_placement::query};
  retry_policy retry_;
  std::string timezone_{"Europe/London"};
  std::chrono::seconds timetable_check_interval_{3600};
};

using env_lookup = std::function<std::optional<std::string>(char const*)>;

// INI keys mirror the field names without the trailing underscore. The
// RTC_RT_URL, RTC_TT_URL, RTC_API_KEY, RTC_ARCHIVE_ROOT and
// RTC_POLL_INTERVAL environment variables override the file.
archiver_config load_archiver_config(
    std::optional<std::filesystem::path> const& file, env_lookup env = {});

// Checks ranges and that archive_root can be created and written.
void validate(archiver_config const& c);

enum class archive_kind { rt_snapshot, timetable_daily };

struct archive_entry {
  unixtime fetched_at_;
  archive_kind kind_{archive_kind::rt_snapshot};
  std::filesystem::path path_;
  std::uint64_t byte_size_{0U};
  std::string content_hash_;  // SHA-256, lowercase hex
};

std::string sha256_hex(std::string_view data);

struct fetch_result {
  std::optional<std::string> body_;
  int status_{0};  // last HTTP status, 0 on transport error
  int attempts_{0};
  std::string error_;
};

// Time source for the collectors. Tests substitute a simulated clock.
struct collector_clock {
  std::function<unixtime()> now_;
  // Returns false when stop was requested before the deadline.
  std::function<bool(unixtime, std::stop_token const&)> sleep_until_;
  std::function<void(std::chrono::milliseconds)> backoff_;
};

collector_clock system_collector_clock();

// Retries transport errors and 5xx responses up to max_attempts with
// exponential backoff. 4xx responses are not retried.
fetch_result fetch_url(std::string const& url, archiver_config const& c,
                       collector_clock const& clock);

std::filesystem::path rt_snapshot_path(std::filesystem::path const& root,
                                       date local_date, unixtime fetched_at);

// One poll. Returns the entry written, or nullopt when the fetch failed or
// the target name already exists. Throws fatal_io_error when the disk is
// full.
std::optional<archive_entry> poll_rt_once(archiver_config const& c,
                                          time_zone const& tz,
                                          collector_clock const& clock);

enum class timetable_fetch_status { fetched, already_present, quarantined, failed };

struct timetable_fetch_result {
  timetable_fetch_status status_{timetable_fetch_status::failed};
  std::optional<archive_entry> entry_;
};

timetable_fetch_result fetch_timetable_once(archiver_config const& c,
                                            time_zone const& tz,
                                            collector_clock const& clock,
                                            bool force);

// Fixed-interval polling anchored at loop start until stop is requested
// or max_polls polls have run. Returns the number of snapshots written.
std::size_t run_rt_collector(archiver_config const& c, std::stop_token stop,
                             collector_clock const& clock,
                             std::optional<std::size_t> max_polls = {});

// Checks once per timetable_check_interval whether today's archive exists.
std::size_t run_timetable_collector(archiver_config const& c,
                                    std::stop_token stop,
                                    collector_clock const& clock, bool force,
                                    std::optional<std::size_t> max_checks = {});

}  // namespace rtc
