#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rtc/gtfs_model.hpp"
#include "rtc/rt_ingest.hpp"
#include "rtc/stop_time_inference.hpp"

namespace rtc {

struct corrected_gtfs_bundle {
  date service_date_;
  std::string service_id_;
  std::vector<corrected_trip> trips_;  // sorted by trip_id
  std::vector<agency> agencies_;
  std::vector<route> routes_;
  std::vector<stop> stops_;
};

std::string synthetic_service_id(date d);

// Collects the routes, agencies, and stops referenced by trips. Each entity
// is taken from the first source snapshot that has it (pass the target day
// first). Routes without a known agency get a placeholder agency in
// fallback_timezone. Throws contract_violation if a referenced stop or route
// exists in no source.
corrected_gtfs_bundle assemble_bundle(
    date service_date, std::vector<corrected_trip> trips,
    std::span<std::shared_ptr<timetable_snapshot const> const> sources,
    std::string const& fallback_timezone);

// ZIP bytes: agency, stops, routes, trips, stop_times, calendar_dates.
// stop_times carries the extra column rtc_provenance and trips carries
// rtc_source_date. Output is byte-identical for identical bundles.
std::string serialize_bundle(corrected_gtfs_bundle const& bundle);

void write_bundle(corrected_gtfs_bundle const& bundle,
                  std::filesystem::path const& out_path);

// Reads a bundle written by write_bundle, including the extension columns.
// Scheduled times are not part of the bundle and are left equal to the
// corrected times.
corrected_gtfs_bundle read_bundle(std::filesystem::path const& zip_path);

struct resolution_stats {
  std::size_t records_{0U};
  std::size_t resolved_same_day_{0U};
  std::size_t resolved_window_{0U};
  std::size_t no_trip_id_{0U};
  std::size_t unknown_trip_id_{0U};
  std::size_t distinct_trip_ids_{0U};
  std::size_t window_days_missing_{0U};
  std::size_t window_loads_failed_{0U};
  std::size_t same_day_inactive_trips_{0U};
};

struct matching_stats {
  std::size_t observations_{0U};
  std::size_t out_of_window_{0U};
  std::size_t matched_{0U};
  std::size_t unmatched_{0U};
  std::size_t stop_lookup_failures_{0U};
  std::size_t monotonicity_discards_{0U};
  std::size_t trips_observed_{0U};
  std::size_t trips_emitted_{0U};
  std::size_t trips_below_min_matches_{0U};

  matching_stats& operator+=(matching_stats const&);
};

struct inference_stats {
  std::size_t stop_times_{0U};
  std::size_t matched_{0U};
  std::size_t interpolated_{0U};
  std::size_t extrapolated_backward_{0U};
  std::size_t extrapolated_forward_{0U};
  std::size_t monotonicity_adjustments_{0U};

  void add(corrected_trip const&);
};

struct run_stats {
  date service_date_;
  ingest_stats ingest_;
  resolution_stats resolution_;
  matching_stats matching_;
  inference_stats inference_;
};

// Stable schema (schema_version 1): exact counts per stage plus derived
// ratios, which are null when their denominator is zero.
nlohmann::json run_report_json(run_stats const& stats);

void write_run_report(run_stats const& stats,
                      std::filesystem::path const& out_path);

}  // namespace rtc
