#include "rtc/geo.hpp"

#include <algorithm>
#include <string>

#include "rtc/error.hpp"

namespace rtc {

bool is_valid(geo_point const& p) {
  return std::isfinite(p.lat_) && std::isfinite(p.lon_) && p.lat_ >= -90.0 &&
         p.lat_ <= 90.0 && p.lon_ >= -180.0 && p.lon_ <= 180.0;
}

geo_point make_geo_point(double const lat, double const lon) {
  auto const p = geo_point{lat, lon};
  if (!is_valid(p)) {
    throw invalid_parameter{"coordinate out of range: " + std::to_string(lat) +
                            "," + std::to_string(lon)};
  }
  return p;
}

double great_circle_distance(geo_point const& a, geo_point const& b) {
  auto const phi1 = to_radians(a.lat_);
  auto const phi2 = to_radians(b.lat_);
  auto const dphi = phi2 - phi1;
  auto const dlambda = to_radians(b.lon_ - a.lon_);
  auto const s1 = std::sin(dphi / 2.0);
  auto const s2 = std::sin(dlambda / 2.0);
  auto const h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusMeters * std::asin(std::sqrt(std::min(1.0, h)));
}

double meters_to_angular_threshold(double const radius_m, double) {
  if (!(radius_m > 0.0) || !std::isfinite(radius_m)) {
    throw invalid_parameter{"radius must be positive, got " +
                            std::to_string(radius_m)};
  }
  return radius_m / kMetersPerDegreeLatitude;
}

}  // namespace rtc
