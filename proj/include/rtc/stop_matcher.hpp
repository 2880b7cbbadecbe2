#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtc/geo.hpp"
#include "rtc/gtfs_model.hpp"
#include "rtc/model.hpp"

namespace rtc {

struct matcher_config {
  double radius_m_{300.0};
  double delta_deg_{300.0 / kMetersPerDegreeLatitude};
};

// Throws invalid_parameter for a non-positive radius.
matcher_config make_matcher_config(double radius_m);

// One stop position along a trip, with coordinates resolved.
struct trip_stop {
  std::string_view stop_id_;
  geo_point location_;
  std::uint32_t stop_sequence_{0U};
};

// Resolves a trip's stops against the snapshot in stop_sequence order.
// Stops without coordinates are skipped and counted in `unresolved`.
std::vector<trip_stop> resolve_trip_stops(scheduled_trip const& trip,
                                          timetable_snapshot const& snapshot,
                                          std::size_t& unresolved);

// |lat_s - lat_p| < delta and |(lon_s - lon_p) * cos(lat_p)| < delta
inline bool in_coarse_box(geo_point const& p, geo_point const& s,
                          double const delta_deg, double const cos_lat_p) {
  return std::abs(s.lat_ - p.lat_) < delta_deg &&
         std::abs((s.lon_ - p.lon_) * cos_lat_p) < delta_deg;
}

// Stops passing the bounding-box test, in route order.
std::vector<trip_stop> coarse_filter(geo_point const& p,
                                     std::span<trip_stop const> stops,
                                     double delta_deg);

struct candidate_stop {
  trip_stop stop_;
  double exact_distance_{0.0};
};

struct stop_match {
  std::string trip_id_;
  std::string stop_id_;
  std::uint32_t stop_sequence_{0U};
  double matched_distance_{0.0};
  unixtime observed_at_;

  friend bool operator==(stop_match const&, stop_match const&) = default;
};

// Distances within this many meters count as equal for tie-breaking.
inline constexpr double kDistanceTieEpsilon = 1e-9;

// Nearest coarse-box candidate by haversine distance; ties go to the lower
// stop_sequence. No match when the box is empty.
std::optional<stop_match> match_observation(
    vehicle_position_record const& record, std::string_view trip_id,
    std::span<trip_stop const> stops, matcher_config const& config);

struct reduced_matches {
  std::map<std::uint32_t, stop_match> by_sequence_;
  std::size_t monotonicity_discards_{0U};
};

// Keeps the closest observation per stop_sequence (earliest on distance
// ties), then discards matches until timestamps strictly increase along the
// trip: of an out-of-order adjacent pair, the one farther from its stop goes.
reduced_matches reduce_matches(std::span<stop_match const> matches);

// Debug export: trip_id,stop_id,stop_sequence,matched_distance_m,observed_at
std::string matches_to_csv(std::span<stop_match const> matches);

}  // namespace rtc
