#include "rtc/gtfs_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <optional>

#include "rtc/csv.hpp"
#include "rtc/error.hpp"
#include "rtc/zip.hpp"

namespace fs = std::filesystem;

namespace rtc {

void load_stats::count(std::string const& reason, std::string detail) {
  ++issues_[reason];
  if (!detail.empty() && sample_warnings_.size() < 50U) {
    sample_warnings_.push_back(reason + ": " + std::move(detail));
  }
}

std::size_t load_stats::issue(std::string const& reason) const {
  auto const it = issues_.find(reason);
  return it == end(issues_) ? 0U : it->second;
}

scheduled_trip const* timetable_snapshot::find_trip(
    std::string_view trip_id) const {
  auto const it = trips_by_id_.find(std::string{trip_id});
  return it == end(trips_by_id_) ? nullptr : &it->second;
}

stop const* timetable_snapshot::find_stop(std::string_view stop_id) const {
  auto const it = stops_by_id_.find(std::string{stop_id});
  return it == end(stops_by_id_) ? nullptr : &it->second;
}

bool timetable_snapshot::service_active(std::string const& service_id,
                                        date const d) const {
  if (auto const ex = calendar_dates_.find(service_id);
      ex != end(calendar_dates_)) {
    if (auto const e = ex->second.find(format_gtfs_date(d));
        e != end(ex->second)) {
      return e->second == 1;
    }
  }
  auto const cal = calendar_.find(service_id);
  if (cal == end(calendar_)) {
    return false;
  }
  auto const& c = cal->second;
  auto const day = std::chrono::sys_days{d};
  return day >= std::chrono::sys_days{c.start_} &&
         day <= std::chrono::sys_days{c.end_} &&
         c.weekdays_.test(iso_weekday_index(d));
}

std::unordered_set<std::string> timetable_snapshot::active_service_ids(
    date const d) const {
  auto out = std::unordered_set<std::string>{};
  for (auto const& [id, _] : calendar_) {
    if (service_active(id, d)) {
      out.insert(id);
    }
  }
  for (auto const& [id, _] : calendar_dates_) {
    if (service_active(id, d)) {
      out.insert(id);
    }
  }
  return out;
}

bool trip_active_on(timetable_snapshot const& snapshot,
                    std::string_view trip_id, date const d) {
  auto const* trip = snapshot.find_trip(trip_id);
  if (trip == nullptr) {
    throw not_found{"unknown trip_id '" + std::string{trip_id} + "'"};
  }
  return snapshot.service_active(trip->service_id_, d);
}

namespace {

void require_columns(csv::reader const& r, std::string_view file,
                     std::initializer_list<std::string_view> required) {
  for (auto const name : required) {
    if (!r.column(name)) {
      throw load_error{std::string{file} + " lacks required column " +
                       std::string{name}};
    }
  }
}

std::string_view get(std::vector<std::string> const& row,
                     std::optional<std::size_t> const idx) {
  return idx && *idx < row.size() ? std::string_view{row[*idx]}
                                  : std::string_view{};
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) {
    return std::nullopt;
  }
  auto v = 0.0;
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

std::optional<std::uint32_t> parse_uint(std::string_view s) {
  auto v = std::uint32_t{0U};
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

std::string require(zip::reader& z, std::string_view name) {
  auto content = z.read(name);
  if (!content) {
    throw load_error{"GTFS archive lacks required file " + std::string{name}};
  }
  return std::move(*content);
}

void load_agencies(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  auto const id = r.column("agency_id");
  auto const name = r.column("agency_name");
  auto const url = r.column("agency_url");
  auto const tz = r.column("agency_timezone");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto a = agency{std::string{get(row, id)}, std::string{get(row, name)},
                    std::string{get(row, url)}, std::string{get(row, tz)}};
    tt.agencies_by_id_.emplace(a.id_, std::move(a));
  }
}

void load_stops(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  require_columns(r, "stops.txt", {"stop_id"});
  auto const id = r.column("stop_id");
  auto const name = r.column("stop_name");
  auto const lat = r.column("stop_lat");
  auto const lon = r.column("stop_lon");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto const stop_id = get(row, id);
    auto const la = parse_double(get(row, lat));
    auto const lo = parse_double(get(row, lon));
    if (stop_id.empty()) {
      tt.stats_.count("stops_missing_id");
      continue;
    }
    if (!la || !lo || !is_valid(geo_point{*la, *lo})) {
      tt.stats_.count("stops_without_coordinates", std::string{stop_id});
      continue;
    }
    auto s = stop{std::string{stop_id}, std::string{get(row, name)},
                  geo_point{*la, *lo}};
    if (!tt.stops_by_id_.emplace(s.id_, s).second) {
      tt.stats_.count("stops_duplicate_id", s.id_);
    }
  }
  tt.stats_.stops_ = tt.stops_by_id_.size();
}

void load_routes(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  require_columns(r, "routes.txt", {"route_id"});
  auto const id = r.column("route_id");
  auto const agency_id = r.column("agency_id");
  auto const short_name = r.column("route_short_name");
  auto const long_name = r.column("route_long_name");
  auto const type = r.column("route_type");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto rt = route{std::string{get(row, id)}, std::string{get(row, agency_id)},
                    std::string{get(row, short_name)},
                    std::string{get(row, long_name)},
                    std::string{get(row, type)}};
    if (rt.id_.empty()) {
      tt.stats_.count("routes_missing_id");
      continue;
    }
    tt.routes_by_id_.emplace(rt.id_, std::move(rt));
  }
  tt.stats_.routes_ = tt.routes_by_id_.size();
}

void load_calendar(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  require_columns(r, "calendar.txt",
          {"service_id", "monday", "tuesday", "wednesday", "thursday",
           "friday", "saturday", "sunday", "start_date", "end_date"});
  auto const id = r.column("service_id");
  auto const days = std::array{r.column("monday"),   r.column("tuesday"),
                               r.column("wednesday"), r.column("thursday"),
                               r.column("friday"),   r.column("saturday"),
                               r.column("sunday")};
  auto const start = r.column("start_date");
  auto const end = r.column("end_date");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto const s = parse_gtfs_date(get(row, start));
    auto const e = parse_gtfs_date(get(row, end));
    if (!s || !e) {
      tt.stats_.count("calendar_bad_date", std::string{get(row, id)});
      continue;
    }
    auto c = calendar_entry{{}, *s, *e};
    for (auto i = 0U; i != 7U; ++i) {
      c.weekdays_.set(i, get(row, days[i]) == "1");
    }
    tt.calendar_.emplace(std::string{get(row, id)}, c);
  }
}

void load_calendar_dates(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  require_columns(r, "calendar_dates.txt", {"service_id", "date", "exception_type"});
  auto const id = r.column("service_id");
  auto const d = r.column("date");
  auto const type = r.column("exception_type");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto const day = parse_gtfs_date(get(row, d));
    auto const t = get(row, type);
    if (!day || (t != "1" && t != "2")) {
      tt.stats_.count("calendar_dates_bad_row", std::string{get(row, id)});
      continue;
    }
    tt.calendar_dates_[std::string{get(row, id)}][format_gtfs_date(*day)] =
        t == "1" ? 1 : 2;
  }
}

void load_trips(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  require_columns(r, "trips.txt", {"trip_id", "route_id", "service_id"});
  auto const id = r.column("trip_id");
  auto const route_id = r.column("route_id");
  auto const service_id = r.column("service_id");
  auto const shape_id = r.column("shape_id");
  auto const headsign = r.column("trip_headsign");
  auto const direction = r.column("direction_id");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto t = scheduled_trip{};
    t.trip_id_ = get(row, id);
    t.route_id_ = get(row, route_id);
    t.service_id_ = get(row, service_id);
    if (auto const s = get(row, shape_id); !s.empty()) {
      t.shape_id_ = std::string{s};
    }
    t.headsign_ = get(row, headsign);
    t.direction_id_ = get(row, direction);
    if (t.trip_id_.empty()) {
      tt.stats_.count("trips_missing_id");
      continue;
    }
    if (!tt.routes_by_id_.contains(t.route_id_)) {
      tt.stats_.count("trips_unknown_route", t.trip_id_);
      continue;
    }
    if (!tt.calendar_.contains(t.service_id_) &&
        !tt.calendar_dates_.contains(t.service_id_)) {
      tt.stats_.count("trips_unknown_service", t.trip_id_);
    }
    auto const key = t.trip_id_;
    if (!tt.trips_by_id_.emplace(key, std::move(t)).second) {
      tt.stats_.count("trips_duplicate_id", key);
    }
  }
}

void load_stop_times(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  require_columns(r, "stop_times.txt", {"trip_id", "stop_id", "stop_sequence"});
  auto const trip_id = r.column("trip_id");
  auto const stop_id = r.column("stop_id");
  auto const seq = r.column("stop_sequence");
  auto const arr = r.column("arrival_time");
  auto const dep = r.column("departure_time");

  auto row = std::vector<std::string>{};
  auto key = std::string{};
  scheduled_trip* last_trip = nullptr;
  while (r.next(row)) {
    auto const tid = get(row, trip_id);
    if (last_trip == nullptr || last_trip->trip_id_ != tid) {
      key.assign(tid);
      auto const it = tt.trips_by_id_.find(key);
      last_trip = it == end(tt.trips_by_id_) ? nullptr : &it->second;
    }
    if (last_trip == nullptr) {
      tt.stats_.count("stop_times_unknown_trip", std::string{tid});
      continue;
    }
    auto const sid = get(row, stop_id);
    if (!tt.stops_by_id_.contains(std::string{sid})) {
      tt.stats_.count("stop_times_unknown_stop",
                      std::string{tid} + " -> " + std::string{sid});
      continue;
    }
    auto const sequence = parse_uint(get(row, seq));
    auto a = parse_gtfs_time(get(row, arr));
    auto d = parse_gtfs_time(get(row, dep));
    if (!a) {
      a = d;
    }
    if (!d) {
      d = a;
    }
    if (!sequence || !a) {
      tt.stats_.count("stop_times_bad_row",
                      std::string{tid} + " line " + std::to_string(r.line()));
      continue;
    }
    if (*d < *a) {
      tt.stats_.count("stop_times_departure_before_arrival", std::string{tid});
      d = a;
    }
    last_trip->stop_times_.push_back(
        scheduled_stop_time{std::string{sid}, *sequence, *a, *d});
    ++tt.stats_.stop_times_;
  }
}

void load_frequencies(timetable_snapshot& tt, std::string_view content) {
  auto r = csv::reader{content};
  auto const trip_id = r.column("trip_id");
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto const it = tt.trips_by_id_.find(std::string{get(row, trip_id)});
    if (it != end(tt.trips_by_id_)) {
      tt.stats_.stop_times_ -= it->second.stop_times_.size();
      tt.stats_.count("trips_frequency_based", it->first);
      tt.trips_by_id_.erase(it);
    }
  }
}

void finalize_trips(timetable_snapshot& tt) {
  for (auto it = begin(tt.trips_by_id_); it != end(tt.trips_by_id_);) {
    auto& st = it->second.stop_times_;
    std::stable_sort(begin(st), end(st), [](auto const& a, auto const& b) {
      return a.stop_sequence_ < b.stop_sequence_;
    });
    auto reason = std::string_view{};
    if (st.empty()) {
      reason = "trips_without_stop_times";
    } else {
      for (auto i = 1U; i < st.size(); ++i) {
        if (st[i].stop_sequence_ == st[i - 1].stop_sequence_) {
          reason = "trips_duplicate_stop_sequence";
          break;
        }
        if (st[i].arrival_ < st[i - 1].arrival_) {
          reason = "trips_non_monotonic_times";
          break;
        }
      }
    }
    if (!reason.empty()) {
      tt.stats_.stop_times_ -= st.size();
      tt.stats_.count(std::string{reason}, it->first);
      it = tt.trips_by_id_.erase(it);
    } else {
      ++it;
    }
  }
  tt.stats_.trips_ = tt.trips_by_id_.size();
}

}  // namespace

timetable_snapshot load_timetable(fs::path const& zip_path,
                                  date const snapshot_date) {
  auto z = zip::reader{zip_path};

  auto tt = timetable_snapshot{};
  tt.snapshot_date_ = snapshot_date;

  auto const stops = require(z, "stops.txt");
  auto const routes = require(z, "routes.txt");
  auto const trips = require(z, "trips.txt");
  auto const stop_times = require(z, "stop_times.txt");
  auto const calendar = z.read("calendar.txt");
  auto const calendar_dates = z.read("calendar_dates.txt");
  if (!calendar && !calendar_dates) {
    throw load_error{
        "GTFS archive lacks both calendar.txt and calendar_dates.txt"};
  }

  if (auto const agencies = z.read("agency.txt")) {
    load_agencies(tt, *agencies);
  }
  load_stops(tt, stops);
  load_routes(tt, routes);
  if (calendar) {
    load_calendar(tt, *calendar);
  }
  if (calendar_dates) {
    load_calendar_dates(tt, *calendar_dates);
  }
  load_trips(tt, trips);
  load_stop_times(tt, stop_times);
  if (auto const freq = z.read("frequencies.txt")) {
    load_frequencies(tt, *freq);
  }
  finalize_trips(tt);
  return tt;
}

}  // namespace rtc
