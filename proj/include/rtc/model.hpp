#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtc/geo.hpp"
#include "rtc/time.hpp"

namespace rtc {

struct stop {
  std::string id_;
  std::string name_;
  geo_point location_;
};

// Owned by a scheduled_trip, which carries the trip_id.
struct scheduled_stop_time {
  std::string stop_id_;
  std::uint32_t stop_sequence_{0U};
  service_time arrival_;
  service_time departure_;
};

struct scheduled_trip {
  std::string trip_id_;
  std::string route_id_;
  std::string service_id_;
  std::optional<std::string> shape_id_;
  std::string headsign_;
  std::string direction_id_;
  std::vector<scheduled_stop_time> stop_times_;
};

struct vehicle_position_record {
  unixtime observed_at_;
  std::string vehicle_id_;
  std::optional<std::string> trip_id_;
  std::optional<std::string> route_id_;
  geo_point position_;
  std::optional<date> start_date_;

  friend bool operator==(vehicle_position_record const&,
                         vehicle_position_record const&) = default;
};

}  // namespace rtc
