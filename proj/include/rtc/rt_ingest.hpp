#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "rtc/model.hpp"
#include "rtc/time.hpp"

namespace rtc {

struct ingest_stats {
  std::size_t snapshots_read_{0U};
  std::size_t raw_records_{0U};
  std::size_t deduplicated_records_{0U};
  std::size_t records_with_trip_id_{0U};
  std::size_t parse_failures_{0U};

  // Entity-level counters accumulated while parsing.
  std::size_t trip_update_entities_{0U};
  std::size_t alert_entities_{0U};
  std::size_t vehicles_without_position_{0U};
  std::size_t vehicles_without_timestamp_{0U};
  std::size_t invalid_positions_{0U};

  ingest_stats& operator+=(ingest_stats const&);
};

struct snapshot_parse_result {
  bool ok_{true};
  std::vector<vehicle_position_record> records_;
  ingest_stats stats_;
};

// Decodes one GTFS-RT FeedMessage. Only VehiclePosition entities produce
// records; the entity timestamp wins over the header timestamp. Coordinates
// are stored at microdegree resolution. A malformed message yields ok_ =
// false, no records, and parse_failures_ = 1.
snapshot_parse_result parse_rt_snapshot(std::string_view bytes);

struct daily_position_table {
  date service_date_;
  // Sorted by (vehicle_id, observed_at), remaining fields as tie-breakers.
  std::vector<vehicle_position_record> records_;
  ingest_stats stats_;
};

// Merges parsed snapshots and drops records identical on
// (vehicle_id, latitude, longitude, observed_at).
daily_position_table merge_and_deduplicate(
    std::vector<std::vector<vehicle_position_record>> snapshots,
    date service_date);

// Snapshot files of one day (<root>/rt/<YYYY-MM-DD>/<epoch>.pbf), oldest first.
std::vector<std::filesystem::path> list_snapshots(
    std::filesystem::path const& archive_root, date d);

// Parses every snapshot of the day in parallel and merges them. Unreadable
// or malformed snapshots are counted, never fatal.
daily_position_table ingest_day(std::filesystem::path const& archive_root,
                                date d, unsigned workers);

inline constexpr std::string_view kPositionsCsvHeader =
    "observed_at,vehicle_id,trip_id,route_id,latitude,longitude,start_date";

void export_daily_csv(daily_position_table const& table,
                      std::filesystem::path const& path);

// Inverse of export_daily_csv. Only the record-derived stats are restored.
daily_position_table import_daily_csv(std::filesystem::path const& path,
                                      date service_date);

}  // namespace rtc
