#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace rtc {

// Seconds since the Unix epoch, UTC.
using unixtime = std::chrono::sys_seconds;

using date = std::chrono::year_month_day;

// Seconds since the start of a service day. Values >= 86400 denote
// post-midnight operation of the same service day and never wrap.
struct service_time {
  std::int32_t seconds_{0};

  friend auto operator<=>(service_time, service_time) = default;
};

inline constexpr std::int32_t operator-(service_time a, service_time b) {
  return a.seconds_ - b.seconds_;
}

inline constexpr service_time operator+(service_time a, std::int32_t s) {
  return service_time{a.seconds_ + s};
}

// "H:MM:SS" or "HH:MM:SS", hours may exceed 23.
std::optional<service_time> parse_gtfs_time(std::string_view s);

// Always at least two hour digits: 88200 -> "24:30:00".
std::string format_gtfs_time(service_time t);

// "YYYY-MM-DD"
std::optional<date> parse_iso_date(std::string_view s);
std::string format_iso_date(date d);

// "YYYYMMDD"
std::optional<date> parse_gtfs_date(std::string_view s);
std::string format_gtfs_date(date d);

date add_days(date d, int days);

// 0 = Monday ... 6 = Sunday
unsigned iso_weekday_index(date d);

class time_zone {
public:
  // IANA name resolved against the system zoneinfo database.
  static time_zone load(std::string const& name,
                        std::string const& zoneinfo_root = "/usr/share/zoneinfo");

  // Raw POSIX TZ rule string, e.g. "GMT0BST,M3.5.0/1,M10.5.0".
  static time_zone from_posix(std::string const& name, std::string const& rule);

  std::string const& name() const { return name_; }

  std::chrono::seconds utc_offset(unixtime t) const;

  date local_date(unixtime t) const;

  // Wall-clock time on a local date. Nonexistent or ambiguous wall times
  // resolve using the standard (non-DST) offset.
  unixtime local_to_utc(date d, std::chrono::seconds since_local_midnight) const;

private:
  struct impl;
  time_zone(std::string name, std::shared_ptr<impl const> p);

  std::string name_;
  std::shared_ptr<impl const> impl_;
};

// Anchors ServiceTime values of one service date: reference_ is local noon
// minus twelve hours.
struct service_day {
  date date_;
  unixtime reference_;
};

service_day make_service_day(date d, time_zone const& tz);

// Throws out_of_window unless t lies in [reference - 6 h, reference + 30 h].
service_time to_service_time(unixtime t, service_day const& day);
service_time to_service_time(unixtime t, date d, time_zone const& tz);

unixtime to_unixtime(service_time t, service_day const& day);

}  // namespace rtc
