#include "rtc/gtfs_writer.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "rtc/csv.hpp"
#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/log.hpp"
#include "rtc/zip.hpp"

namespace fs = std::filesystem;

namespace rtc {

std::string synthetic_service_id(date const d) {
  return "rtc_" + format_gtfs_date(d);
}

namespace {

std::string shortest(double const v) {
  char buf[32];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

template <typename T>
T const* find_in(std::span<std::shared_ptr<timetable_snapshot const> const> sources,
                 std::unordered_map<std::string, T> timetable_snapshot::*member,
                 std::string const& id) {
  for (auto const& s : sources) {
    if (s == nullptr) {
      continue;
    }
    auto const& m = (*s).*member;
    if (auto const it = m.find(id); it != end(m)) {
      return &it->second;
    }
  }
  return nullptr;
}

}  // namespace

corrected_gtfs_bundle assemble_bundle(
    date const service_date, std::vector<corrected_trip> trips,
    std::span<std::shared_ptr<timetable_snapshot const> const> sources,
    std::string const& fallback_timezone) {
  auto b = corrected_gtfs_bundle{};
  b.service_date_ = service_date;
  b.service_id_ = synthetic_service_id(service_date);
  std::sort(begin(trips), end(trips), [](auto const& x, auto const& y) {
    return x.trip_id_ < y.trip_id_;
  });

  auto stop_ids = std::set<std::string>{};
  auto route_ids = std::set<std::string>{};
  for (auto const& t : trips) {
    route_ids.insert(t.route_id_);
    for (auto const& st : t.stop_times_) {
      stop_ids.insert(st.stop_id_);
    }
  }

  for (auto const& id : stop_ids) {
    auto const* s = find_in(sources, &timetable_snapshot::stops_by_id_, id);
    if (s == nullptr) {
      throw contract_violation{"corrected trip references stop '" + id +
                               "' absent from every source timetable"};
    }
    b.stops_.push_back(*s);
  }

  auto agency_ids = std::set<std::string>{};
  for (auto const& id : route_ids) {
    auto const* r = find_in(sources, &timetable_snapshot::routes_by_id_, id);
    if (r == nullptr) {
      throw contract_violation{"corrected trip references route '" + id +
                               "' absent from every source timetable"};
    }
    b.routes_.push_back(*r);
    if (b.routes_.back().type_.empty()) {
      b.routes_.back().type_ = "3";
    }
    agency_ids.insert(r->agency_id_);
  }

  for (auto const& id : agency_ids) {
    if (auto const* a =
            find_in(sources, &timetable_snapshot::agencies_by_id_, id)) {
      b.agencies_.push_back(*a);
      continue;
    }
    log::warn("bundle_placeholder_agency", {{"agency_id", id}});
    b.agencies_.push_back(agency{id, id.empty() ? "unknown" : id,
                                 "http://localhost/", fallback_timezone});
  }

  b.trips_ = std::move(trips);
  return b;
}

std::string serialize_bundle(corrected_gtfs_bundle const& b) {
  auto agency_csv = csv::writer{};
  agency_csv.row(
      {"agency_id", "agency_name", "agency_url", "agency_timezone"});
  for (auto const& a : b.agencies_) {
    agency_csv.row({a.id_, a.name_, a.url_, a.timezone_});
  }

  auto stops_csv = csv::writer{};
  stops_csv.row({"stop_id", "stop_name", "stop_lat", "stop_lon"});
  for (auto const& s : b.stops_) {
    stops_csv.row({s.id_, s.name_, shortest(s.location_.lat_),
                   shortest(s.location_.lon_)});
  }

  auto routes_csv = csv::writer{};
  routes_csv.row({"route_id", "agency_id", "route_short_name",
                  "route_long_name", "route_type"});
  for (auto const& r : b.routes_) {
    routes_csv.row({r.id_, r.agency_id_, r.short_name_, r.long_name_, r.type_});
  }

  auto trips_csv = csv::writer{};
  trips_csv.row({"route_id", "service_id", "trip_id", "trip_headsign",
                 "direction_id", "rtc_source_date"});
  auto stop_times_csv = csv::writer{};
  stop_times_csv.row({"trip_id", "arrival_time", "departure_time", "stop_id",
                      "stop_sequence", "rtc_provenance"});
  for (auto const& t : b.trips_) {
    trips_csv.row({t.route_id_, b.service_id_, t.trip_id_, t.headsign_,
                   t.direction_id_,
                   t.source_snapshot_date_
                       ? format_gtfs_date(*t.source_snapshot_date_)
                       : std::string{}});
    for (auto const& st : t.stop_times_) {
      auto const time = format_gtfs_time(st.corrected_);
      stop_times_csv.row({t.trip_id_, time, time, st.stop_id_,
                          std::to_string(st.stop_sequence_),
                          to_string(st.provenance_)});
    }
  }

  auto calendar_csv = csv::writer{};
  calendar_csv.row({"service_id", "date", "exception_type"});
  if (!b.trips_.empty()) {
    calendar_csv.row({b.service_id_, format_gtfs_date(b.service_date_), "1"});
  }

  auto z = zip::writer{};
  z.add("agency.txt", agency_csv.str());
  z.add("stops.txt", stops_csv.str());
  z.add("routes.txt", routes_csv.str());
  z.add("trips.txt", trips_csv.str());
  z.add("stop_times.txt", stop_times_csv.str());
  z.add("calendar_dates.txt", calendar_csv.str());
  return z.finish();
}

void write_bundle(corrected_gtfs_bundle const& bundle, fs::path const& out_path) {
  if (bundle.trips_.empty()) {
    log::warn("bundle_empty", {{"service_date", format_iso_date(bundle.service_date_)},
                               {"path", out_path.string()}});
  }
  write_file_atomic(out_path, serialize_bundle(bundle));
}

corrected_gtfs_bundle read_bundle(fs::path const& zip_path) {
  auto z = zip::reader{zip_path};
  auto read = [&](std::string_view name) {
    auto c = z.read(name);
    if (!c) {
      throw load_error{"bundle lacks " + std::string{name}};
    }
    return std::move(*c);
  };

  auto b = corrected_gtfs_bundle{};
  auto row = std::vector<std::string>{};

  auto const cal = read("calendar_dates.txt");
  auto cal_r = csv::reader{cal};
  if (cal_r.next(row)) {
    b.service_id_ = row[0];
    if (auto const d = parse_gtfs_date(row[1])) {
      b.service_date_ = *d;
    }
  }

  auto const tt = load_timetable(zip_path, b.service_date_);
  for (auto const& [_, a] : tt.agencies_by_id_) {
    b.agencies_.push_back(a);
  }
  for (auto const& [_, r] : tt.routes_by_id_) {
    b.routes_.push_back(r);
  }
  for (auto const& [_, s] : tt.stops_by_id_) {
    b.stops_.push_back(s);
  }
  std::sort(begin(b.agencies_), end(b.agencies_),
            [](auto const& x, auto const& y) { return x.id_ < y.id_; });
  std::sort(begin(b.routes_), end(b.routes_),
            [](auto const& x, auto const& y) { return x.id_ < y.id_; });
  std::sort(begin(b.stops_), end(b.stops_),
            [](auto const& x, auto const& y) { return x.id_ < y.id_; });

  auto source_dates = std::map<std::string, std::optional<date>>{};
  auto const trips = read("trips.txt");
  auto trips_r = csv::reader{trips};
  auto const trip_col = trips_r.column("trip_id");
  auto const source_col = trips_r.column("rtc_source_date");
  while (trips_r.next(row)) {
    source_dates[row[trip_col.value()]] =
        source_col ? parse_gtfs_date(row[*source_col]) : std::nullopt;
  }

  auto prov = std::map<std::pair<std::string, std::uint32_t>, provenance>{};
  auto const stop_times = read("stop_times.txt");
  auto st_r = csv::reader{stop_times};
  auto const st_trip = st_r.column("trip_id");
  auto const st_seq = st_r.column("stop_sequence");
  auto const st_prov = st_r.column("rtc_provenance");
  while (st_r.next(row)) {
    auto seq = std::uint32_t{0U};
    std::from_chars(row[st_seq.value()].data(),
                    row[st_seq.value()].data() + row[st_seq.value()].size(), seq);
    auto const p = st_prov ? parse_provenance(row[*st_prov]) : std::nullopt;
    prov[{row[st_trip.value()], seq}] = p.value_or(provenance::matched);
  }

  for (auto const& [id, trip] : tt.trips_by_id_) {
    auto ct = corrected_trip{};
    ct.trip_id_ = id;
    ct.route_id_ = trip.route_id_;
    ct.headsign_ = trip.headsign_;
    ct.direction_id_ = trip.direction_id_;
    ct.service_date_ = b.service_date_;
    if (auto const it = source_dates.find(id); it != end(source_dates)) {
      ct.source_snapshot_date_ = it->second;
    }
    for (auto const& st : trip.stop_times_) {
      auto const p = prov[{id, st.stop_sequence_}];
      ct.stop_times_.push_back(corrected_stop_time{
          st.stop_id_, st.stop_sequence_, st.arrival_, st.arrival_, p, false});
      if (p == provenance::matched) {
        ++ct.match_count_;
      }
    }
    b.trips_.push_back(std::move(ct));
  }
  std::sort(begin(b.trips_), end(b.trips_),
            [](auto const& x, auto const& y) { return x.trip_id_ < y.trip_id_; });
  return b;
}

matching_stats& matching_stats::operator+=(matching_stats const& o) {
  observations_ += o.observations_;
  out_of_window_ += o.out_of_window_;
  matched_ += o.matched_;
  unmatched_ += o.unmatched_;
  stop_lookup_failures_ += o.stop_lookup_failures_;
  monotonicity_discards_ += o.monotonicity_discards_;
  trips_observed_ += o.trips_observed_;
  trips_emitted_ += o.trips_emitted_;
  trips_below_min_matches_ += o.trips_below_min_matches_;
  return *this;
}

void inference_stats::add(corrected_trip const& t) {
  for (auto const& st : t.stop_times_) {
    ++stop_times_;
    switch (st.provenance_) {
      case provenance::matched: ++matched_; break;
      case provenance::interpolated: ++interpolated_; break;
      case provenance::extrapolated_backward: ++extrapolated_backward_; break;
      case provenance::extrapolated_forward: ++extrapolated_forward_; break;
    }
  }
  monotonicity_adjustments_ += t.monotonicity_adjustments_;
}

namespace {

nlohmann::json ratio(std::size_t const num, std::size_t const den) {
  if (den == 0U) {
    return nullptr;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

nlohmann::json run_report_json(run_stats const& s) {
  auto const& in = s.ingest_;
  auto const& res = s.resolution_;
  auto const& m = s.matching_;
  auto const& inf = s.inference_;
  auto const resolved = res.resolved_same_day_ + res.resolved_window_;
  return {
      {"schema_version", 1},
      {"service_date", format_iso_date(s.service_date_)},
      {"ingest",
       {{"snapshots_read", in.snapshots_read_},
        {"parse_failures", in.parse_failures_},
        {"raw_records", in.raw_records_},
        {"deduplicated_records", in.deduplicated_records_},
        {"duplicates_removed", in.raw_records_ - in.deduplicated_records_},
        {"records_with_trip_id", in.records_with_trip_id_},
        {"trip_update_entities", in.trip_update_entities_},
        {"alert_entities", in.alert_entities_},
        {"vehicles_without_position", in.vehicles_without_position_},
        {"vehicles_without_timestamp", in.vehicles_without_timestamp_},
        {"invalid_positions", in.invalid_positions_},
        {"dedup_ratio",
         ratio(in.raw_records_ - in.deduplicated_records_, in.raw_records_)}}},
      {"resolution",
       {{"records", res.records_},
        {"resolved_same_day", res.resolved_same_day_},
        {"resolved_window", res.resolved_window_},
        {"no_trip_id", res.no_trip_id_},
        {"unknown_trip_id", res.unknown_trip_id_},
        {"distinct_trip_ids", res.distinct_trip_ids_},
        {"window_days_missing", res.window_days_missing_},
        {"window_loads_failed", res.window_loads_failed_},
        {"same_day_inactive_trips", res.same_day_inactive_trips_},
        {"resolution_rate", ratio(resolved, res.records_)},
        {"window_share", ratio(res.resolved_window_, res.records_)}}},
      {"matching",
       {{"observations", m.observations_},
        {"out_of_window", m.out_of_window_},
        {"matched", m.matched_},
        {"unmatched", m.unmatched_},
        {"stop_lookup_failures", m.stop_lookup_failures_},
        {"monotonicity_discards", m.monotonicity_discards_},
        {"trips_observed", m.trips_observed_},
        {"trips_emitted", m.trips_emitted_},
        {"trips_below_min_matches", m.trips_below_min_matches_},
        {"match_rate", ratio(m.matched_, m.observations_)}}},
      {"inference",
       {{"stop_times", inf.stop_times_},
        {"matched", inf.matched_},
        {"interpolated", inf.interpolated_},
        {"extrapolated_backward", inf.extrapolated_backward_},
        {"extrapolated_forward", inf.extrapolated_forward_},
        {"monotonicity_adjustments", inf.monotonicity_adjustments_},
        {"matched_share", ratio(inf.matched_, inf.stop_times_)},
        {"interpolated_share", ratio(inf.interpolated_, inf.stop_times_)},
        {"extrapolated_share",
         ratio(inf.extrapolated_backward_ + inf.extrapolated_forward_,
               inf.stop_times_)}}}};
}

void write_run_report(run_stats const& stats, fs::path const& out_path) {
  write_file_atomic(out_path, run_report_json(stats).dump(2) + "\n");
}

}  // namespace rtc
