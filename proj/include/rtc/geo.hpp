#pragma once

#include <cmath>
#include <numbers>

namespace rtc {

inline constexpr double kEarthRadiusMeters = 6371008.8;
inline constexpr double kMetersPerDegreeLatitude = 111320.0;

inline constexpr double to_radians(double deg) {
  return deg * std::numbers::pi / 180.0;
}

// WGS84 decimal degrees.
struct geo_point {
  double lat_{0.0};
  double lon_{0.0};

  friend bool operator==(geo_point const&, geo_point const&) = default;
};

bool is_valid(geo_point const& p);

// Throws invalid_parameter when out of range.
geo_point make_geo_point(double lat, double lon);

// Haversine distance on a sphere of radius kEarthRadiusMeters.
double great_circle_distance(geo_point const& a, geo_point const& b);

// Angular threshold in degrees for a metric radius. The latitude argument is
// accepted for interface stability and currently ignored.
double meters_to_angular_threshold(double radius_m, double at_latitude = 0.0);

}  // namespace rtc
