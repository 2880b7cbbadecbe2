#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtc/geo.hpp"
#include "rtc/time.hpp"

namespace rtc {

// d(seq) = constant + per_sequence * seq, rounded to whole seconds.
struct delay_model {
  double constant_{0.0};
  double per_sequence_{0.0};

  std::int32_t at(std::uint32_t stop_sequence) const;
};

enum class sampling_mode {
  interval,    // reports on a fixed clock grid along the delayed trajectory
  exact_stops  // one report per stop, at its actual time and coordinates
};

struct replay_options {
  date service_date_{std::chrono::year{2024} / 3 / 12};
  std::string timezone_{"Europe/London"};
  std::size_t routes_{10U};
  std::size_t trips_per_route_{10U};
  std::size_t stops_per_route_{30U};
  double stop_spacing_m_{400.0};
  std::int32_t scheduled_gap_s_{120};
  std::int32_t first_departure_s_{6 * 3600};
  std::int32_t last_departure_s_{20 * 3600};
  delay_model delay_;
  double dropout_{0.0};  // per-stop probability of losing all nearby reports
  sampling_mode sampling_{sampling_mode::interval};
  std::int32_t report_interval_s_{30};
  std::int32_t poll_interval_s_{30};
  // Share of trips present only in the following day's timetable.
  double adjacent_day_share_{0.0};
  // Share of snapshot files replaced by unparseable bytes.
  double corrupt_share_{0.0};
  std::uint64_t seed_{1U};
  geo_point origin_{51.5, -0.12};
  double region_m_{20000.0};
};

struct truth_stop_time {
  std::string trip_id_;
  std::string stop_id_;
  std::uint32_t stop_sequence_{0U};
  service_time scheduled_;
  service_time actual_;
  bool dropped_{false};
};

struct replay_summary {
  std::size_t trips_{0U};
  std::size_t adjacent_only_trips_{0U};
  std::size_t stops_{0U};
  std::size_t reports_{0U};          // distinct vehicle reports
  std::size_t snapshot_entities_{0U};  // reports counted once per poll
  std::size_t snapshots_{0U};
  std::size_t corrupted_snapshots_{0U};
  std::vector<std::string> adjacent_only_trip_ids_;
  std::vector<truth_stop_time> truth_;
};

// Writes <root>/gtfs/<date>.zip, <root>/gtfs/<date+1>.zip when an adjacent
// share is requested, and <root>/rt/<date>/<epoch>.pbf snapshots.
// Deterministic for a given seed. Throws invalid_parameter on bad options.
replay_summary generate_replay(replay_options const& o,
                               std::filesystem::path const& archive_root);

std::string truth_to_csv(std::vector<truth_stop_time> const& truth);

}  // namespace rtc
