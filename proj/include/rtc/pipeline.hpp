#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rtc/gtfs_writer.hpp"
#include "rtc/parallel.hpp"
#include "rtc/rt_ingest.hpp"
#include "rtc/time.hpp"
#include "rtc/trip_resolver.hpp"

namespace rtc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitMissingArchive = 2;
inline constexpr int kExitFatalLoad = 3;
inline constexpr int kExitWriteFailure = 4;

struct pipeline_config {
  std::filesystem::path archive_root_;
  std::filesystem::path work_root_;
  std::string timezone_{"Europe/London"};
  double radius_m_{300.0};
  int window_before_{7};
  int window_after_{7};
  std::size_t min_matches_{1U};
  unsigned worker_count_{default_worker_count()};
  std::string log_level_{"info"};
  bool export_positions_{false};
  bool export_matches_{false};
};

// Throws invalid_parameter naming the offending field.
void validate(pipeline_config const& c);

struct day_output {
  corrected_gtfs_bundle bundle_;
  run_stats stats_;
  std::vector<stop_match> matches_;  // filled when requested
};

// Resolve, match, and infer one day's deduplicated positions. Pure with
// respect to its inputs apart from lazy window loads; the result does not
// depend on worker_count.
day_output correct_day(daily_position_table const& positions,
                       resolution_window& window, time_zone const& tz,
                       pipeline_config const& config,
                       bool keep_matches = false);

struct day_result {
  date date_;
  int exit_code_{kExitOk};
  std::string message_;
  std::optional<run_stats> stats_;
  std::filesystem::path bundle_path_;
  std::filesystem::path report_path_;
};

std::filesystem::path bundle_path(std::filesystem::path const& work_root, date d);
std::filesystem::path report_path(std::filesystem::path const& work_root, date d);
std::filesystem::path positions_path(std::filesystem::path const& work_root,
                                     date d);

// Exit codes: 0 ok, 2 missing archive, 3 fatal load, 4 write failure.
day_result run_day(pipeline_config const& config, date d);

// Days are independent; a failing day does not stop the range. A summary
// table is printed to `summary` when given.
std::vector<day_result> run_range(pipeline_config const& config, date start,
                                  date end, std::ostream* summary = nullptr);

}  // namespace rtc
