#pragma once

#include <bitset>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rtc/model.hpp"
#include "rtc/time.hpp"

namespace rtc {

struct agency {
  std::string id_;
  std::string name_;
  std::string url_;
  std::string timezone_;
};

struct route {
  std::string id_;
  std::string agency_id_;
  std::string short_name_;
  std::string long_name_;
  std::string type_;
};

struct calendar_entry {
  std::bitset<7> weekdays_;  // bit 0 = Monday
  date start_;
  date end_;
};

// Counts of rows and trips dropped or repaired while loading, keyed by reason.
struct load_stats {
  std::size_t stops_{0U};
  std::size_t routes_{0U};
  std::size_t trips_{0U};
  std::size_t stop_times_{0U};
  std::map<std::string, std::size_t> issues_;
  std::vector<std::string> sample_warnings_;

  void count(std::string const& reason, std::string detail = {});
  std::size_t issue(std::string const& reason) const;
};

class timetable_snapshot {
public:
  date snapshot_date_;
  std::unordered_map<std::string, scheduled_trip> trips_by_id_;
  std::unordered_map<std::string, stop> stops_by_id_;
  std::unordered_map<std::string, route> routes_by_id_;
  std::unordered_map<std::string, agency> agencies_by_id_;
  std::unordered_map<std::string, calendar_entry> calendar_;
  // service_id -> (GTFS date string YYYYMMDD -> exception_type)
  std::unordered_map<std::string, std::unordered_map<std::string, int>>
      calendar_dates_;
  load_stats stats_;

  scheduled_trip const* find_trip(std::string_view trip_id) const;
  stop const* find_stop(std::string_view stop_id) const;

  bool service_active(std::string const& service_id, date d) const;
  std::unordered_set<std::string> active_service_ids(date d) const;
};

// Loads a GTFS ZIP. Rows with unresolvable references are dropped and
// counted. Throws load_error when the archive is unreadable or a required
// file is missing.
timetable_snapshot load_timetable(std::filesystem::path const& zip_path,
                                  date snapshot_date);

// Throws not_found for an unknown trip.
bool trip_active_on(timetable_snapshot const& snapshot,
                    std::string_view trip_id, date d);

}  // namespace rtc
