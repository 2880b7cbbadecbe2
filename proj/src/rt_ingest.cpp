#include "rtc/rt_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

#include "gtfs-realtime.pb.h"

#include "rtc/csv.hpp"
#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/log.hpp"
#include "rtc/parallel.hpp"

namespace fs = std::filesystem;
namespace gtfsrt = transit_realtime;

namespace rtc {

ingest_stats& ingest_stats::operator+=(ingest_stats const& o) {
  snapshots_read_ += o.snapshots_read_;
  raw_records_ += o.raw_records_;
  deduplicated_records_ += o.deduplicated_records_;
  records_with_trip_id_ += o.records_with_trip_id_;
  parse_failures_ += o.parse_failures_;
  trip_update_entities_ += o.trip_update_entities_;
  alert_entities_ += o.alert_entities_;
  vehicles_without_position_ += o.vehicles_without_position_;
  vehicles_without_timestamp_ += o.vehicles_without_timestamp_;
  invalid_positions_ += o.invalid_positions_;
  return *this;
}

namespace {

double to_microdegrees(double const deg) {
  return std::round(deg * 1e6) / 1e6;
}

auto sort_key(vehicle_position_record const& r) {
  return std::tie(r.vehicle_id_, r.observed_at_, r.position_.lat_,
                  r.position_.lon_, r.trip_id_, r.route_id_, r.start_date_);
}

bool same_dedup_key(vehicle_position_record const& a,
                    vehicle_position_record const& b) {
  return a.vehicle_id_ == b.vehicle_id_ && a.observed_at_ == b.observed_at_ &&
         a.position_.lat_ == b.position_.lat_ &&
         a.position_.lon_ == b.position_.lon_;
}

}  // namespace

snapshot_parse_result parse_rt_snapshot(std::string_view bytes) {
  auto result = snapshot_parse_result{};
  auto msg = gtfsrt::FeedMessage{};
  if (bytes.size() > static_cast<std::size_t>(std::numeric_limits<int>::max()) ||
      !msg.ParseFromArray(bytes.data(), static_cast<int>(bytes.size()))) {
    result.ok_ = false;
    result.stats_.parse_failures_ = 1U;
    return result;
  }

  auto const header_ts = msg.header().has_timestamp()
                             ? std::optional{msg.header().timestamp()}
                             : std::nullopt;
  for (auto const& entity : msg.entity()) {
    if (entity.has_trip_update()) {
      ++result.stats_.trip_update_entities_;
    }
    if (entity.has_alert()) {
      ++result.stats_.alert_entities_;
    }
    if (!entity.has_vehicle() || entity.is_deleted()) {
      continue;
    }
    auto const& vp = entity.vehicle();
    if (!vp.has_position()) {
      ++result.stats_.vehicles_without_position_;
      continue;
    }
    auto const ts = vp.has_timestamp() ? std::optional{vp.timestamp()} : header_ts;
    if (!ts.has_value()) {
      ++result.stats_.vehicles_without_timestamp_;
      continue;
    }

    auto const pos = geo_point{to_microdegrees(vp.position().latitude()),
                               to_microdegrees(vp.position().longitude())};
    if (!is_valid(pos)) {
      ++result.stats_.invalid_positions_;
      continue;
    }

    auto rec = vehicle_position_record{};
    rec.observed_at_ = unixtime{std::chrono::seconds{static_cast<std::int64_t>(*ts)}};
    rec.position_ = pos;
    if (vp.has_vehicle() && !vp.vehicle().id().empty()) {
      rec.vehicle_id_ = vp.vehicle().id();
    } else if (vp.has_vehicle() && !vp.vehicle().label().empty()) {
      rec.vehicle_id_ = vp.vehicle().label();
    } else {
      rec.vehicle_id_ = entity.id();
    }
    if (vp.has_trip()) {
      auto const& trip = vp.trip();
      if (!trip.trip_id().empty()) {
        rec.trip_id_ = trip.trip_id();
      }
      if (!trip.route_id().empty()) {
        rec.route_id_ = trip.route_id();
      }
      if (trip.has_start_date()) {
        rec.start_date_ = parse_gtfs_date(trip.start_date());
      }
    }
    result.records_.push_back(std::move(rec));
  }
  result.stats_.raw_records_ = result.records_.size();
  return result;
}

daily_position_table merge_and_deduplicate(
    std::vector<std::vector<vehicle_position_record>> snapshots,
    date const service_date) {
  auto table = daily_position_table{};
  table.service_date_ = service_date;

  auto total = std::size_t{0U};
  for (auto const& s : snapshots) {
    total += s.size();
  }
  table.records_.reserve(total);
  for (auto& s : snapshots) {
    std::move(begin(s), end(s), std::back_inserter(table.records_));
    s.clear();
    s.shrink_to_fit();
  }

  auto& recs = table.records_;
  std::sort(begin(recs), end(recs), [](auto const& a, auto const& b) {
    return sort_key(a) < sort_key(b);
  });
  recs.erase(std::unique(begin(recs), end(recs), same_dedup_key), end(recs));

  table.stats_.raw_records_ = total;
  table.stats_.deduplicated_records_ = recs.size();
  table.stats_.records_with_trip_id_ = static_cast<std::size_t>(
      std::count_if(begin(recs), end(recs),
                    [](auto const& r) { return r.trip_id_.has_value(); }));
  return table;
}

std::vector<fs::path> list_snapshots(fs::path const& archive_root,
                                     date const d) {
  auto const dir = archive_root / "rt" / format_iso_date(d);
  auto files = std::vector<std::pair<std::int64_t, fs::path>>{};
  auto ec = std::error_code{};
  for (auto const& e : fs::directory_iterator{dir, ec}) {
    if (!e.is_regular_file() || e.path().extension() != ".pbf") {
      continue;
    }
    auto const stem = e.path().stem().string();
    auto epoch = std::int64_t{0};
    auto const [ptr, err] =
        std::from_chars(stem.data(), stem.data() + stem.size(), epoch);
    if (err != std::errc{} || ptr != stem.data() + stem.size()) {
      continue;
    }
    files.emplace_back(epoch, e.path());
  }
  std::sort(begin(files), end(files));
  auto out = std::vector<fs::path>{};
  out.reserve(files.size());
  for (auto& [_, p] : files) {
    out.push_back(std::move(p));
  }
  return out;
}

daily_position_table ingest_day(fs::path const& archive_root, date const d,
                                unsigned const workers) {
  auto const files = list_snapshots(archive_root, d);
  auto parsed = std::vector<std::vector<vehicle_position_record>>(files.size());
  auto stats = std::vector<ingest_stats>(files.size());

  parallel_for(files.size(), workers, [&](std::size_t const i) {
    auto bytes = std::string{};
    try {
      bytes = read_file(files[i]);
    } catch (io_error const& e) {
      log::warn("snapshot_unreadable", {{"path", files[i].string()},
                                        {"error", e.what()}});
      stats[i].parse_failures_ = 1U;
      return;
    }
    auto r = parse_rt_snapshot(bytes);
    if (!r.ok_) {
      log::warn("snapshot_parse_failure", {{"path", files[i].string()}});
    }
    parsed[i] = std::move(r.records_);
    stats[i] = r.stats_;
  });

  auto total = ingest_stats{};
  for (auto const& s : stats) {
    total += s;
  }
  auto table = merge_and_deduplicate(std::move(parsed), d);
  table.stats_.snapshots_read_ = files.size();
  table.stats_.parse_failures_ = total.parse_failures_;
  table.stats_.trip_update_entities_ = total.trip_update_entities_;
  table.stats_.alert_entities_ = total.alert_entities_;
  table.stats_.vehicles_without_position_ = total.vehicles_without_position_;
  table.stats_.vehicles_without_timestamp_ = total.vehicles_without_timestamp_;
  table.stats_.invalid_positions_ = total.invalid_positions_;
  return table;
}

void export_daily_csv(daily_position_table const& table, fs::path const& path) {
  auto w = csv::writer{};
  w.row({"observed_at", "vehicle_id", "trip_id", "route_id", "latitude",
         "longitude", "start_date"});
  char lat[32];
  char lon[32];
  for (auto const& r : table.records_) {
    std::snprintf(lat, sizeof(lat), "%.6f", r.position_.lat_);
    std::snprintf(lon, sizeof(lon), "%.6f", r.position_.lon_);
    w.row({std::to_string(r.observed_at_.time_since_epoch().count()),
           r.vehicle_id_, r.trip_id_.value_or(""), r.route_id_.value_or(""),
           lat, lon,
           r.start_date_ ? format_gtfs_date(*r.start_date_) : std::string{}});
  }
  try {
    write_file_atomic(path, w.str());
  } catch (io_error const& e) {
    throw io_error{std::string{"exporting positions: "} + e.what()};
  }
}

daily_position_table import_daily_csv(fs::path const& path,
                                      date const service_date) {
  auto const content = read_file(path);
  auto r = csv::reader{content};
  auto const expected = std::vector<std::string>{
      "observed_at", "vehicle_id", "trip_id",   "route_id",
      "latitude",    "longitude",  "start_date"};
  if (r.header() != expected) {
    throw load_error{"unexpected positions CSV header in " + path.string()};
  }

  auto table = daily_position_table{};
  table.service_date_ = service_date;
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto rec = vehicle_position_record{};
    auto epoch = std::int64_t{0};
    if (std::from_chars(row[0].data(), row[0].data() + row[0].size(), epoch)
            .ec != std::errc{}) {
      throw load_error{path.string() + ":" + std::to_string(r.line()) +
                       ": bad observed_at"};
    }
    rec.observed_at_ = unixtime{std::chrono::seconds{epoch}};
    rec.vehicle_id_ = row[1];
    if (!row[2].empty()) {
      rec.trip_id_ = row[2];
    }
    if (!row[3].empty()) {
      rec.route_id_ = row[3];
    }
    rec.position_ = geo_point{std::strtod(row[4].c_str(), nullptr),
                              std::strtod(row[5].c_str(), nullptr)};
    if (!row[6].empty()) {
      rec.start_date_ = parse_gtfs_date(row[6]);
    }
    table.records_.push_back(std::move(rec));
  }
  table.stats_.raw_records_ = table.records_.size();
  table.stats_.deduplicated_records_ = table.records_.size();
  table.stats_.records_with_trip_id_ = static_cast<std::size_t>(std::count_if(
      begin(table.records_), end(table.records_),
      [](auto const& x) { return x.trip_id_.has_value(); }));
  return table;
}

}  // namespace rtc
