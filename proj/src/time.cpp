#include "rtc/time.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <regex>

#include "boost/date_time/local_time/local_time.hpp"
#include "boost/date_time/posix_time/posix_time.hpp"

#include "rtc/error.hpp"

namespace rtc {

namespace {

template <typename T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) {
    return false;
  }
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::optional<service_time> parse_gtfs_time(std::string_view s) {
  while (!s.empty() && s.front() == ' ') {
    s.remove_prefix(1);
  }
  while (!s.empty() && s.back() == ' ') {
    s.remove_suffix(1);
  }
  auto const c1 = s.find(':');
  if (c1 == std::string_view::npos) {
    return std::nullopt;
  }
  auto const c2 = s.find(':', c1 + 1);
  if (c2 == std::string_view::npos || s.size() - c2 - 1 != 2 ||
      c2 - c1 - 1 != 2 || c1 == 0 || c1 > 3) {
    return std::nullopt;
  }
  auto h = 0, m = 0, sec = 0;
  if (!parse_int(s.substr(0, c1), h) || !parse_int(s.substr(c1 + 1, 2), m) ||
      !parse_int(s.substr(c2 + 1, 2), sec) || h < 0 || m > 59 || sec > 59) {
    return std::nullopt;
  }
  return service_time{h * 3600 + m * 60 + sec};
}

std::string format_gtfs_time(service_time const t) {
  auto const s = t.seconds_;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", s / 3600, (s / 60) % 60,
                s % 60);
  return buf;
}

std::optional<date> parse_iso_date(std::string_view s) {
  auto y = 0;
  auto m = 0U, d = 0U;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
      !parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
      !parse_int(s.substr(8, 2), d)) {
    return std::nullopt;
  }
  auto const ymd = date{std::chrono::year{y}, std::chrono::month{m},
                        std::chrono::day{d}};
  return ymd.ok() ? std::optional{ymd} : std::nullopt;
}

std::string format_iso_date(date const d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

std::optional<date> parse_gtfs_date(std::string_view s) {
  auto y = 0;
  auto m = 0U, d = 0U;
  if (s.size() != 8 || !parse_int(s.substr(0, 4), y) ||
      !parse_int(s.substr(4, 2), m) || !parse_int(s.substr(6, 2), d)) {
    return std::nullopt;
  }
  auto const ymd = date{std::chrono::year{y}, std::chrono::month{m},
                        std::chrono::day{d}};
  return ymd.ok() ? std::optional{ymd} : std::nullopt;
}

std::string format_gtfs_date(date const d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d%02u%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

date add_days(date const d, int const days) {
  return date{std::chrono::sys_days{d} + std::chrono::days{days}};
}

unsigned iso_weekday_index(date const d) {
  return std::chrono::weekday{std::chrono::sys_days{d}}.iso_encoding() - 1U;
}

// ---------------------------------------------------------------------------

namespace bl = boost::local_time;
namespace bp = boost::posix_time;
namespace bg = boost::gregorian;

struct time_zone::impl {
  bl::time_zone_ptr tz_;
};

time_zone::time_zone(std::string name, std::shared_ptr<impl const> p)
    : name_{std::move(name)}, impl_{std::move(p)} {}

namespace {

// "[+-]h[:mm[:ss]]" in seconds.
long parse_posix_offset(std::string const& s) {
  auto sign = 1L;
  auto pos = std::size_t{0U};
  if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
    sign = s[0] == '-' ? -1L : 1L;
    pos = 1U;
  }
  auto total = 0L;
  auto scale = 3600L;
  while (pos < s.size() && scale != 0L) {
    auto const colon = s.find(':', pos);
    auto const part = s.substr(pos, colon == std::string::npos ? std::string::npos
                                                               : colon - pos);
    total += std::stol(part) * scale;
    scale /= 60L;
    pos = colon == std::string::npos ? s.size() : colon + 1U;
  }
  return sign * total;
}

std::string format_posix_offset(long const seconds) {
  auto const a = std::abs(seconds);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02ld:%02ld:%02ld", seconds < 0 ? "-" : "+",
                a / 3600L, a / 60L % 60L, a % 60L);
  return buf;
}

}  // namespace

time_zone time_zone::from_posix(std::string const& name,
                                std::string const& rule) {
  // Boost does not understand quoted abbreviations such as "<+03>-3".
  static auto const quoted = std::regex{"<[^>]*>"};
  auto normalized = std::string{};
  auto n = 0;
  auto it = std::sregex_iterator{rule.begin(), rule.end(), quoted};
  auto last = rule.cbegin();
  for (; it != std::sregex_iterator{}; ++it) {
    normalized.append(last, rule.cbegin() + it->position());
    normalized += n++ == 0 ? "ZZA" : "ZZB";
    last = rule.cbegin() + it->position() + it->length();
  }
  normalized.append(last, rule.cend());

  // POSIX offsets count west of UTC and the DST offset is absolute; Boost
  // counts east and takes the DST offset as a delta to standard time.
  static auto const head = std::regex{
      "^([A-Za-z]{3,})([+-]?[0-9:]+)(?:([A-Za-z]{3,})([+-]?[0-9:]+)?)?(,.*)?$"};
  auto m = std::smatch{};
  if (std::regex_match(normalized, m, head)) {
    auto const std_east = -parse_posix_offset(m[2].str());
    auto rewritten = m[1].str() + format_posix_offset(std_east) + m[3].str();
    if (m[4].matched) {
      rewritten += format_posix_offset(-parse_posix_offset(m[4].str()) - std_east);
    }
    normalized = rewritten + m[5].str();
  }
  try {
    auto p = std::make_shared<impl>();
    p->tz_ = bl::time_zone_ptr{new bl::posix_time_zone{normalized}};
    return time_zone{name, std::move(p)};
  } catch (std::exception const& e) {
    throw invalid_parameter{"cannot parse time zone rule '" + rule +
                            "': " + e.what()};
  }
}

time_zone time_zone::load(std::string const& name,
                          std::string const& zoneinfo_root) {
  if (name.empty() || name.find("..") != std::string::npos) {
    throw invalid_parameter{"invalid time zone name '" + name + "'"};
  }
  auto in = std::ifstream{zoneinfo_root + "/" + name, std::ios::binary};
  if (!in) {
    throw invalid_parameter{"unknown time zone '" + name + "'"};
  }
  auto const content = std::string{std::istreambuf_iterator<char>{in},
                                   std::istreambuf_iterator<char>{}};
  if (content.size() < 5 || content.compare(0, 4, "TZif") != 0 ||
      content[4] < '2') {
    throw invalid_parameter{"time zone '" + name +
                            "' has no POSIX footer (TZif v2+ required)"};
  }
  // The footer is the last newline-enclosed line of the file.
  auto const end = content.find_last_not_of('\n');
  auto const begin = content.rfind('\n', end);
  if (end == std::string::npos || begin == std::string::npos) {
    throw invalid_parameter{"time zone '" + name + "' footer missing"};
  }
  return from_posix(name, content.substr(begin + 1, end - begin));
}

namespace {

bp::ptime to_ptime(unixtime const t) {
  return bp::from_time_t(static_cast<std::time_t>(t.time_since_epoch().count()));
}

unixtime from_ptime(bp::ptime const& p) {
  auto const epoch = bp::ptime{bg::date{1970, 1, 1}};
  return unixtime{std::chrono::seconds{(p - epoch).total_seconds()}};
}

}  // namespace

std::chrono::seconds time_zone::utc_offset(unixtime const t) const {
  auto const ldt = bl::local_date_time{to_ptime(t), impl_->tz_};
  return std::chrono::seconds{(ldt.local_time() - ldt.utc_time()).total_seconds()};
}

date time_zone::local_date(unixtime const t) const {
  auto const ldt = bl::local_date_time{to_ptime(t), impl_->tz_};
  auto const d = ldt.local_time().date();
  return date{std::chrono::year{d.year()},
              std::chrono::month{static_cast<unsigned>(d.month())},
              std::chrono::day{static_cast<unsigned>(d.day())}};
}

unixtime time_zone::local_to_utc(date const d,
                                 std::chrono::seconds const since_midnight) const {
  auto const local_midnight_as_utc =
      unixtime{std::chrono::sys_days{d}} + since_midnight;
  auto const standard = std::chrono::seconds{
      impl_->tz_->base_utc_offset().total_seconds()};
  // Candidate using the standard offset, then correct by the offset actually
  // in force at that instant if it maps back to the requested wall time.
  auto const guess = local_midnight_as_utc - standard;
  auto const actual = utc_offset(guess);
  auto const refined = local_midnight_as_utc - actual;
  if (refined + utc_offset(refined) == local_midnight_as_utc) {
    return refined;
  }
  return guess;
}

service_day make_service_day(date const d, time_zone const& tz) {
  using namespace std::chrono_literals;
  return {d, tz.local_to_utc(d, 12h) - 12h};
}

service_time to_service_time(unixtime const t, service_day const& day) {
  auto const delta = (t - day.reference_).count();
  if (delta < -6 * 3600 || delta > 30 * 3600) {
    throw out_of_window{"timestamp " + std::to_string(t.time_since_epoch().count()) +
                        " outside service day " + format_iso_date(day.date_)};
  }
  return service_time{static_cast<std::int32_t>(delta)};
}

service_time to_service_time(unixtime const t, date const d,
                             time_zone const& tz) {
  return to_service_time(t, make_service_day(d, tz));
}

unixtime to_unixtime(service_time const t, service_day const& day) {
  return day.reference_ + std::chrono::seconds{t.seconds_};
}

}  // namespace rtc
