#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rtc/gtfs_model.hpp"
#include "rtc/gtfs_writer.hpp"

namespace rtc {

struct summary_stats {
  std::size_t count_{0U};
  double mean_{0.0};
  double std_dev_{0.0};  // population
  double minimum_{0.0};
  double median_{0.0};
  double p85_{0.0};
};

// Quantile q of sorted values by linear interpolation at position q * (n - 1).
double quantile_sorted(std::span<double const> sorted, double q);

// Throws invalid_parameter on empty input.
summary_stats summarize(std::span<double const> values);

nlohmann::json to_json(summary_stats const& s);

// Parses `group_key,value_seconds` CSV and summarizes each group.
std::map<std::string, summary_stats> summarize_groups_csv(
    std::string_view csv_content);

struct stop_delay_record {
  std::string stop_id_;
  std::string trip_id_;
  date service_date_;
  std::uint32_t stop_sequence_{0U};
  std::int32_t delay_{0};  // corrected - scheduled, seconds
};

struct delay_table_result {
  std::vector<stop_delay_record> records_;
  std::size_t trips_skipped_{0U};
};

// date -> timetable snapshot, nullptr when unavailable.
using snapshot_source =
    std::function<std::shared_ptr<timetable_snapshot const>(date)>;

// One record per matched stop time. Scheduled times come from each trip's
// source snapshot; trips whose snapshot is unavailable are skipped.
delay_table_result delay_table(corrected_gtfs_bundle const& bundle,
                               snapshot_source const& schedule);

std::string delays_to_csv(std::span<stop_delay_record const> records);

}  // namespace rtc
