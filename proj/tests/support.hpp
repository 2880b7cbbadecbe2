#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "rtc/file_util.hpp"
#include "rtc/zip.hpp"

namespace rtc::test {

// Removes itself on destruction.
class temp_dir {
public:
  temp_dir() {
    auto tmpl = (std::filesystem::temp_directory_path() / "rtc_test_XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw std::runtime_error{"mkdtemp failed"};
    }
    path_ = tmpl;
  }
  ~temp_dir() {
    auto ec = std::error_code{};
    std::filesystem::remove_all(path_, ec);
  }
  temp_dir(temp_dir const&) = delete;
  temp_dir& operator=(temp_dir const&) = delete;

  std::filesystem::path const& path() const { return path_; }
  std::filesystem::path operator/(std::string const& s) const { return path_ / s; }

private:
  std::filesystem::path path_;
};

using gtfs_files = std::map<std::string, std::string>;

inline std::string make_zip(gtfs_files const& files) {
  auto w = zip::writer{};
  for (auto const& [name, content] : files) {
    w.add(name, content);
  }
  return w.finish();
}

inline void write_gtfs(std::filesystem::path const& path, gtfs_files const& files) {
  write_file_atomic(path, make_zip(files));
}

// One route R1 with trip T1 over three stops A, B, C; service WK runs
// Monday to Friday through 2025.
inline gtfs_files minimal_gtfs() {
  return {
      {"agency.txt",
       "agency_id,agency_name,agency_url,agency_timezone\n"
       "AG,Agency,https://example.invalid,Europe/London\n"},
      {"stops.txt",
       "stop_id,stop_name,stop_lat,stop_lon\n"
       "A,Stop A,51.5000,-0.1000\n"
       "B,Stop B,51.5030,-0.1000\n"
       "C,Stop C,51.5060,-0.1000\n"},
      {"routes.txt",
       "route_id,agency_id,route_short_name,route_type\n"
       "R1,AG,1,3\n"},
      {"trips.txt",
       "route_id,service_id,trip_id,trip_headsign,direction_id\n"
       "R1,WK,T1,North,0\n"},
      {"stop_times.txt",
       "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n"
       "T1,14:25:00,14:25:00,A,1\n"
       "T1,14:26:00,14:26:00,B,2\n"
       "T1,14:27:00,14:27:00,C,3\n"},
      {"calendar.txt",
       "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,"
       "start_date,end_date\n"
       "WK,1,1,1,1,1,0,0,20250101,20251231\n"},
  };
}

}  // namespace rtc::test
