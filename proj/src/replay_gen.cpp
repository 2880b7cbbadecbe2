#include "rtc/replay_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "gtfs-realtime.pb.h"

#include "rtc/csv.hpp"
#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/zip.hpp"

namespace fs = std::filesystem;

namespace rtc {

std::int32_t delay_model::at(std::uint32_t const stop_sequence) const {
  return static_cast<std::int32_t>(
      std::lround(constant_ + per_sequence_ * stop_sequence));
}

namespace {

constexpr auto kServiceId = "WEEK";
constexpr auto kCorruptBytes = std::string_view{"\x0a\xff\xff\xff\xff\x0f\x01", 7};

void check(replay_options const& o) {
  auto const fail = [](char const* m) { throw invalid_parameter{m}; };
  if (o.routes_ == 0U || o.trips_per_route_ == 0U) {
    fail("routes and trips_per_route must be positive");
  }
  if (o.stops_per_route_ < 2U) {
    fail("stops_per_route must be at least 2");
  }
  if (!(o.stop_spacing_m_ > 0.0) || o.scheduled_gap_s_ <= 0) {
    fail("stop spacing and scheduled gap must be positive");
  }
  if (o.report_interval_s_ <= 0 || o.poll_interval_s_ <= 0) {
    fail("report and poll intervals must be positive");
  }
  if (o.last_departure_s_ < o.first_departure_s_) {
    fail("last_departure precedes first_departure");
  }
  for (auto const share : {o.dropout_, o.adjacent_day_share_, o.corrupt_share_}) {
    if (!(share >= 0.0 && share <= 1.0)) {
      fail("shares must lie in [0, 1]");
    }
  }
  for (auto k = std::uint32_t{1U}; k < o.stops_per_route_; ++k) {
    if (o.scheduled_gap_s_ + o.delay_.at(k + 1U) - o.delay_.at(k) <= 0) {
      fail("delay model makes actual times non-increasing");
    }
  }
}

geo_point destination(geo_point const& from, double const bearing_rad,
                      double const distance_m) {
  auto const d = distance_m / kEarthRadiusMeters;
  auto const lat1 = to_radians(from.lat_);
  auto const lon1 = to_radians(from.lon_);
  auto const lat2 = std::asin(std::sin(lat1) * std::cos(d) +
                              std::cos(lat1) * std::sin(d) * std::cos(bearing_rad));
  auto const lon2 =
      lon1 + std::atan2(std::sin(bearing_rad) * std::sin(d) * std::cos(lat1),
                        std::cos(d) - std::sin(lat1) * std::sin(lat2));
  auto const deg = 180.0 / std::numbers::pi;
  auto const round6 = [](double v) { return std::round(v * 1e6) / 1e6; };
  return {round6(lat2 * deg), round6(lon2 * deg)};
}

// Picks exactly round(share * n) indices, reproducibly.
std::vector<bool> choose(std::size_t const n, double const share,
                         std::mt19937_64& rng) {
  auto idx = std::vector<std::size_t>(n);
  std::iota(begin(idx), end(idx), std::size_t{0U});
  std::shuffle(begin(idx), end(idx), rng);
  auto const k = static_cast<std::size_t>(std::llround(share * static_cast<double>(n)));
  auto picked = std::vector<bool>(n, false);
  for (auto i = std::size_t{0U}; i != k; ++i) {
    picked[idx[i]] = true;
  }
  return picked;
}

struct route_def {
  std::string id_;
  std::vector<std::string> stop_ids_;
  std::vector<geo_point> stops_;
};

struct trip_def {
  std::string id_;
  std::size_t route_{0U};
  std::int32_t start_{0};
  bool adjacent_only_{false};
  std::vector<std::int64_t> actual_epoch_;  // per stop
  std::vector<bool> dropped_;
};

struct report {
  std::uint32_t trip_{0U};
  std::int64_t at_{0};
  float lat_{0.0F};
  float lon_{0.0F};
};

std::string timetable_zip(replay_options const& o,
                          std::vector<route_def> const& routes,
                          std::vector<trip_def> const& trips,
                          bool const include_adjacent) {
  auto agency = csv::writer{};
  agency.row({"agency_id", "agency_name", "agency_url", "agency_timezone"});
  agency.row({"SYN", "Synthetic Transit", "https://example.invalid",
              o.timezone_});

  auto stops = csv::writer{};
  stops.row({"stop_id", "stop_name", "stop_lat", "stop_lon"});
  char buf[64];
  for (auto const& r : routes) {
    for (auto i = std::size_t{0U}; i != r.stops_.size(); ++i) {
      auto const lat = (std::snprintf(buf, sizeof(buf), "%.6f", r.stops_[i].lat_),
                        std::string{buf});
      auto const lon = (std::snprintf(buf, sizeof(buf), "%.6f", r.stops_[i].lon_),
                        std::string{buf});
      stops.row({r.stop_ids_[i], r.stop_ids_[i], lat, lon});
    }
  }

  auto route_csv = csv::writer{};
  route_csv.row({"route_id", "agency_id", "route_short_name", "route_type"});
  for (auto const& r : routes) {
    route_csv.row({r.id_, "SYN", r.id_, "3"});
  }

  auto trip_csv = csv::writer{};
  trip_csv.row({"route_id", "service_id", "trip_id", "direction_id"});
  auto st = csv::writer{};
  st.row({"trip_id", "arrival_time", "departure_time", "stop_id",
          "stop_sequence"});
  for (auto const& t : trips) {
    if (t.adjacent_only_ && !include_adjacent) {
      continue;
    }
    auto const& r = routes[t.route_];
    trip_csv.row({r.id_, kServiceId, t.id_, "0"});
    for (auto k = std::size_t{0U}; k != r.stops_.size(); ++k) {
      auto const at = format_gtfs_time(service_time{
          t.start_ + static_cast<std::int32_t>(k) * o.scheduled_gap_s_});
      st.row({t.id_, at, at, r.stop_ids_[k], std::to_string(k + 1U)});
    }
  }

  auto cal = csv::writer{};
  cal.row({"service_id", "monday", "tuesday", "wednesday", "thursday", "friday",
           "saturday", "sunday", "start_date", "end_date"});
  cal.row({kServiceId, "1", "1", "1", "1", "1", "1", "1",
           format_gtfs_date(add_days(o.service_date_, -60)),
           format_gtfs_date(add_days(o.service_date_, 60))});

  auto z = zip::writer{};
  z.add("agency.txt", agency.str());
  z.add("stops.txt", stops.str());
  z.add("routes.txt", route_csv.str());
  z.add("trips.txt", trip_csv.str());
  z.add("stop_times.txt", st.str());
  z.add("calendar.txt", cal.str());
  return z.finish();
}

}  // namespace

replay_summary generate_replay(replay_options const& o, fs::path const& root) {
  check(o);
  auto rng = std::mt19937_64{o.seed_};
  auto unit = std::uniform_real_distribution<double>{0.0, 1.0};
  auto const tz = time_zone::load(o.timezone_);
  auto const day = make_service_day(o.service_date_, tz);
  auto const ref = day.reference_.time_since_epoch().count();

  auto summary = replay_summary{};
  char buf[64];

  auto routes = std::vector<route_def>(o.routes_);
  auto const half = o.region_m_ / 2.0;
  for (auto r = std::size_t{0U}; r != o.routes_; ++r) {
    auto& rd = routes[r];
    std::snprintf(buf, sizeof(buf), "R%04zu", r);
    rd.id_ = buf;
    auto const north = (unit(rng) * 2.0 - 1.0) * half;
    auto const east = (unit(rng) * 2.0 - 1.0) * half;
    auto const start = destination(destination(o.origin_, 0.0, north),
                                   std::numbers::pi / 2.0, east);
    auto const bearing = unit(rng) * 2.0 * std::numbers::pi;
    for (auto k = std::size_t{0U}; k != o.stops_per_route_; ++k) {
      std::snprintf(buf, sizeof(buf), "S%04zu_%03zu", r, k + 1U);
      rd.stop_ids_.emplace_back(buf);
      rd.stops_.push_back(
          destination(start, bearing, static_cast<double>(k) * o.stop_spacing_m_));
    }
    summary.stops_ += o.stops_per_route_;
  }

  // Start times are multiples of 300 s so every trip has the same phase
  // against any report grid dividing 300 s.
  auto const span = o.last_departure_s_ - o.first_departure_s_;
  auto const step = o.trips_per_route_ > 1U
                        ? (span / static_cast<std::int32_t>(o.trips_per_route_ - 1U)) /
                              300 * 300
                        : 0;
  auto trips = std::vector<trip_def>{};
  trips.reserve(o.routes_ * o.trips_per_route_);
  for (auto r = std::size_t{0U}; r != o.routes_; ++r) {
    auto const offset = static_cast<std::int32_t>(r % 4U) * 300;
    for (auto j = std::size_t{0U}; j != o.trips_per_route_; ++j) {
      auto t = trip_def{};
      std::snprintf(buf, sizeof(buf), "R%04zu_T%04zu", r, j);
      t.id_ = buf;
      t.route_ = r;
      t.start_ = std::min(o.last_departure_s_,
                          o.first_departure_s_ + offset +
                              static_cast<std::int32_t>(j) * step) /
                 300 * 300;
      for (auto k = std::size_t{0U}; k != o.stops_per_route_; ++k) {
        auto const seq = static_cast<std::uint32_t>(k + 1U);
        t.actual_epoch_.push_back(ref + t.start_ +
                                  static_cast<std::int64_t>(k) * o.scheduled_gap_s_ +
                                  o.delay_.at(seq));
        t.dropped_.push_back(unit(rng) < o.dropout_);
      }
      trips.push_back(std::move(t));
    }
  }
  summary.trips_ = trips.size();

  auto const adjacent = choose(trips.size(), o.adjacent_day_share_, rng);
  for (auto i = std::size_t{0U}; i != trips.size(); ++i) {
    trips[i].adjacent_only_ = adjacent[i];
    if (adjacent[i]) {
      summary.adjacent_only_trip_ids_.push_back(trips[i].id_);
    }
  }
  summary.adjacent_only_trips_ = summary.adjacent_only_trip_ids_.size();

  for (auto const& t : trips) {
    auto const& r = routes[t.route_];
    for (auto k = std::size_t{0U}; k != r.stops_.size(); ++k) {
      summary.truth_.push_back(truth_stop_time{
          t.id_, r.stop_ids_[k], static_cast<std::uint32_t>(k + 1U),
          service_time{t.start_ + static_cast<std::int32_t>(k) * o.scheduled_gap_s_},
          service_time{static_cast<std::int32_t>(t.actual_epoch_[k] - ref)},
          static_cast<bool>(t.dropped_[k])});
    }
  }

  // Vehicle reports, then the polls during which each report is visible.
  auto polls = std::map<std::int64_t, std::vector<report>>{};
  auto const ri = std::int64_t{o.report_interval_s_};
  auto const pi = std::int64_t{o.poll_interval_s_};
  auto const ceil_to = [](std::int64_t v, std::int64_t m) {
    auto q = v / m;
    if (q * m < v) {
      ++q;
    }
    return q * m;
  };
  auto reports = std::vector<report>{};
  for (auto ti = std::size_t{0U}; ti != trips.size(); ++ti) {
    auto const& t = trips[ti];
    auto const& r = routes[t.route_];
    auto const& a = t.actual_epoch_;
    reports.clear();
    auto const emit = [&](std::int64_t const at, geo_point const& p) {
      reports.push_back(report{static_cast<std::uint32_t>(ti), at,
                               static_cast<float>(p.lat_),
                               static_cast<float>(p.lon_)});
    };
    if (o.sampling_ == sampling_mode::exact_stops) {
      for (auto k = std::size_t{0U}; k != a.size(); ++k) {
        if (!t.dropped_[k]) {
          emit(a[k], r.stops_[k]);
        }
      }
    } else {
      auto seg = std::size_t{0U};
      for (auto at = ceil_to(a.front(), ri); at <= a.back(); at += ri) {
        while (seg + 2U < a.size() && at >= a[seg + 1U]) {
          ++seg;
        }
        auto const f = static_cast<double>(at - a[seg]) /
                       static_cast<double>(a[seg + 1U] - a[seg]);
        auto const nearest = f < 0.5 ? seg : seg + 1U;
        if (t.dropped_[nearest]) {
          continue;
        }
        auto const& p0 = r.stops_[seg];
        auto const& p1 = r.stops_[seg + 1U];
        emit(at, geo_point{p0.lat_ + f * (p1.lat_ - p0.lat_),
                           p0.lon_ + f * (p1.lon_ - p0.lon_)});
      }
    }
    summary.reports_ += reports.size();
    for (auto i = std::size_t{0U}; i != reports.size(); ++i) {
      auto const until =
          i + 1U < reports.size() ? reports[i + 1U].at_ : reports[i].at_ + ri;
      for (auto p = ceil_to(reports[i].at_, pi); p < until; p += pi) {
        polls[p].push_back(reports[i]);
        ++summary.snapshot_entities_;
      }
    }
  }

  write_file_atomic(root / "gtfs" / (format_iso_date(o.service_date_) + ".zip"),
                    timetable_zip(o, routes, trips, false));
  if (o.adjacent_day_share_ > 0.0) {
    write_file_atomic(
        root / "gtfs" / (format_iso_date(add_days(o.service_date_, 1)) + ".zip"),
        timetable_zip(o, routes, trips, true));
  }

  auto const corrupt = choose(polls.size(), o.corrupt_share_, rng);
  auto const start_date = format_gtfs_date(o.service_date_);
  auto n = std::size_t{0U};
  for (auto const& [at, entities] : polls) {
    auto const path = root / "rt" /
                      format_iso_date(tz.local_date(unixtime{std::chrono::seconds{at}})) /
                      (std::to_string(at) + ".pbf");
    if (corrupt[n++]) {
      write_file_atomic(path, kCorruptBytes);
      ++summary.corrupted_snapshots_;
      continue;
    }
    auto msg = transit_realtime::FeedMessage{};
    auto* header = msg.mutable_header();
    header->set_gtfs_realtime_version("2.0");
    header->set_incrementality(transit_realtime::FeedHeader::FULL_DATASET);
    header->set_timestamp(static_cast<std::uint64_t>(at));
    for (auto const& e : entities) {
      auto const& t = trips[e.trip_];
      auto* entity = msg.add_entity();
      entity->set_id("V" + t.id_);
      auto* v = entity->mutable_vehicle();
      v->mutable_trip()->set_trip_id(t.id_);
      v->mutable_trip()->set_route_id(routes[t.route_].id_);
      v->mutable_trip()->set_start_date(start_date);
      v->mutable_vehicle()->set_id("V" + t.id_);
      v->mutable_position()->set_latitude(e.lat_);
      v->mutable_position()->set_longitude(e.lon_);
      v->set_timestamp(static_cast<std::uint64_t>(e.at_));
    }
    auto bytes = std::string{};
    msg.SerializeToString(&bytes);
    write_file_atomic(path, bytes);
  }
  summary.snapshots_ = polls.size();
  return summary;
}

std::string truth_to_csv(std::vector<truth_stop_time> const& truth) {
  auto w = csv::writer{};
  w.row({"trip_id", "stop_sequence", "stop_id", "scheduled", "actual",
         "dropped"});
  for (auto const& t : truth) {
    w.row({t.trip_id_, std::to_string(t.stop_sequence_), t.stop_id_,
           format_gtfs_time(t.scheduled_), format_gtfs_time(t.actual_),
           t.dropped_ ? "1" : "0"});
  }
  return w.release();
}

}  // namespace rtc
