#include "rtc/archiver.hpp"

#include <cstdio>
#include <cstdlib>
#include <regex>
#include <thread>

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "httplib.h"

#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/log.hpp"
#include "rtc/zip.hpp"

namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace rtc {

namespace {

std::string unquote(std::string s) {
  if (s.size() >= 2U && (s.front() == '"' || s.front() == '\'') &&
      s.back() == s.front()) {
    return s.substr(1U, s.size() - 2U);
  }
  return s;
}

template <typename T>
T parse_number(std::string const& key, std::string const& value) {
  try {
    auto pos = std::size_t{0U};
    auto const v = std::stoll(value, &pos);
    if (pos != value.size()) {
      throw std::invalid_argument{value};
    }
    return static_cast<T>(v);
  } catch (std::exception const&) {
    throw invalid_parameter{"invalid integer for " + key + ": " + value};
  }
}

std::optional<std::string> system_env(char const* name) {
  if (auto const* v = std::getenv(name); v != nullptr) {
    return std::string{v};
  }
  return std::nullopt;
}

struct split_url {
  std::string origin_;  // scheme://host[:port]
  std::string target_;  // /path?query
};

split_url parse_url(std::string const& url) {
  static auto const re = std::regex{R"(^(https?://[^/?#]+)([^#]*))"};
  auto m = std::smatch{};
  if (!std::regex_search(url, m, re)) {
    throw invalid_parameter{"unsupported URL: " + url};
  }
  auto target = m[2].str();
  if (target.empty() || target.front() != '/') {
    target.insert(0U, "/");
  }
  return {m[1].str(), std::move(target)};
}

}  // namespace

archiver_config load_archiver_config(std::optional<fs::path> const& file,
                                     env_lookup env) {
  if (!env) {
    env = system_env;
  }
  auto c = archiver_config{};
  auto values = std::map<std::string, std::string>{};
  if (file) {
    auto tree = boost::property_tree::ptree{};
    try {
      boost::property_tree::read_ini(file->string(), tree);
    } catch (boost::property_tree::ini_parser_error const& e) {
      throw invalid_parameter{"cannot read config: " + std::string{e.what()}};
    }
    for (auto const& [key, node] : tree) {
      if (node.empty()) {
        values[key] = unquote(node.data());
      } else {
        // [archiver] style section: flatten one level.
        for (auto const& [k, v] : node) {
          values[k] = unquote(v.data());
        }
      }
    }
  }

  auto const overrides = std::initializer_list<std::pair<char const*, char const*>>{
      {"RTC_RT_URL", "rt_feed_url"},
      {"RTC_TT_URL", "timetable_url"},
      {"RTC_API_KEY", "api_key"},
      {"RTC_ARCHIVE_ROOT", "archive_root"},
      {"RTC_POLL_INTERVAL", "poll_interval"}};
  for (auto const& [var, key] : overrides) {
    if (auto v = env(var)) {
      values[key] = *v;
    }
  }

  for (auto const& [key, value] : values) {
    if (key == "rt_feed_url") {
      c.rt_feed_url_ = value;
    } else if (key == "timetable_url") {
      c.timetable_url_ = value;
    } else if (key == "poll_interval") {
      c.poll_interval_ = std::chrono::seconds{parse_number<long>(key, value)};
    } else if (key == "archive_root") {
      c.archive_root_ = value;
    } else if (key == "api_key") {
      if (!value.empty()) {
        c.api_key_ = value;
      }
    } else if (key == "api_key_name") {
      c.api_key_name_ = value;
    } else if (key == "api_key_placement") {
      if (value == "query") {
        c.api_key_placement_ = api_key_placement::query;
      } else if (value == "header") {
        c.api_key_placement_ = api_key_placement::header;
      } else {
        throw invalid_parameter{"api_key_placement must be query or header"};
      }
    } else if (key == "max_attempts") {
      c.retry_.max_attempts_ = parse_number<int>(key, value);
    } else if (key == "backoff_base") {
      c.retry_.backoff_base_ =
          std::chrono::milliseconds{parse_number<long>(key, value) * 1000};
    } else if (key == "backoff_base_ms") {
      c.retry_.backoff_base_ =
          std::chrono::milliseconds{parse_number<long>(key, value)};
    } else if (key == "timezone") {
      c.timezone_ = value;
    } else if (key == "timetable_check_interval") {
      c.timetable_check_interval_ =
          std::chrono::seconds{parse_number<long>(key, value)};
    } else {
      log::warn("config_unknown_key", {{"key", key}});
    }
  }
  return c;
}

void validate(archiver_config const& c) {
  if (c.poll_interval_ < 1s) {
    throw invalid_parameter{"poll_interval must be at least 1 second"};
  }
  if (c.timetable_check_interval_ < 1s) {
    throw invalid_parameter{"timetable_check_interval must be at least 1 second"};
  }
  if (c.retry_.max_attempts_ < 1) {
    throw invalid_parameter{"max_attempts must be at least 1"};
  }
  if (c.retry_.backoff_base_ < 0ms) {
    throw invalid_parameter{"backoff_base must not be negative"};
  }
  if (c.archive_root_.empty()) {
    throw invalid_parameter{"archive_root is required"};
  }
  auto ec = std::error_code{};
  fs::create_directories(c.archive_root_, ec);
  auto probe = c.archive_root_ / ".rtc_write_probe";
  try {
    write_file_atomic(probe, "");
  } catch (io_error const& e) {
    throw invalid_parameter{"archive_root not writable: " + std::string{e.what()}};
  }
  fs::remove(probe, ec);
}

std::string sha256_hex(std::string_view const data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  auto len = 0U;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw error{"SHA-256 failed"};
  }
  auto out = std::string{};
  out.reserve(len * 2U);
  char buf[3];
  for (auto i = 0U; i != len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    out += buf;
  }
  return out;
}

collector_clock system_collector_clock() {
  return collector_clock{
      .now_ = [] {
        return std::chrono::time_point_cast<std::chrono::seconds>(
            std::chrono::system_clock::now());
      },
      .sleep_until_ =
          [](unixtime const deadline, std::stop_token const& stop) {
            while (!stop.stop_requested()) {
              auto const now = std::chrono::system_clock::now();
              if (now >= deadline) {
                return true;
              }
              std::this_thread::sleep_for(
                  std::min<std::chrono::system_clock::duration>(deadline - now,
                                                                200ms));
            }
            return false;
          },
      .backoff_ = [](std::chrono::milliseconds const d) {
        std::this_thread::sleep_for(d);
      }};
}

fetch_result fetch_url(std::string const& url, archiver_config const& c,
                       collector_clock const& clock) {
  auto const [origin, base_target] = parse_url(url);
  auto target = base_target;
  auto headers = httplib::Headers{};
  if (c.api_key_) {
    if (c.api_key_placement_ == api_key_placement::query) {
      target += (target.find('?') == std::string::npos ? '?' : '&');
      target += httplib::detail::encode_query_param(c.api_key_name_) + "=" +
                httplib::detail::encode_query_param(*c.api_key_);
    } else {
      headers.emplace(c.api_key_name_, *c.api_key_);
    }
  }

  auto client = httplib::Client{origin};
  client.set_follow_location(true);
  client.set_connection_timeout(10s);
  client.set_read_timeout(60s);

  auto result = fetch_result{};
  for (auto attempt = 1; attempt <= c.retry_.max_attempts_; ++attempt) {
    result.attempts_ = attempt;
    auto res = client.Get(target, headers);
    if (!res) {
      result.status_ = 0;
      result.error_ = httplib::to_string(res.error());
    } else {
      result.status_ = res->status;
      if (res->status >= 200 && res->status < 300) {
        result.body_ = std::move(res->body);
        result.error_.clear();
        return result;
      }
      result.error_ = "HTTP " + std::to_string(res->status);
      if (res->status < 500) {
        return result;
      }
    }
    if (attempt < c.retry_.max_attempts_ && clock.backoff_) {
      clock.backoff_(c.retry_.backoff_base_ * (1LL << (attempt - 1)));
    }
  }
  return result;
}

fs::path rt_snapshot_path(fs::path const& root, date const local_date,
                          unixtime const fetched_at) {
  return root / "rt" / format_iso_date(local_date) /
         (std::to_string(fetched_at.time_since_epoch().count()) + ".pbf");
}

std::optional<archive_entry> poll_rt_once(archiver_config const& c,
                                          time_zone const& tz,
                                          collector_clock const& clock) {
  auto const fetched_at = clock.now_();
  auto const res = fetch_url(c.rt_feed_url_, c, clock);
  if (!res.body_) {
    log::error("rt_fetch_failed", {{"url", c.rt_feed_url_},
                                   {"status", res.status_},
                                   {"attempts", res.attempts_},
                                   {"error", res.error_}});
    return std::nullopt;
  }
  auto const path = rt_snapshot_path(c.archive_root_, tz.local_date(fetched_at),
                                     fetched_at);
  if (!write_file_atomic(path, *res.body_, false)) {
    log::warn("rt_snapshot_exists", {{"path", path.string()}});
    return std::nullopt;
  }
  auto e = archive_entry{fetched_at, archive_kind::rt_snapshot, path,
                         res.body_->size(), sha256_hex(*res.body_)};
  log::info("rt_snapshot_written", {{"path", path.string()},
                                    {"bytes", e.byte_size_},
                                    {"sha256", e.content_hash_}});
  return e;
}

timetable_fetch_result fetch_timetable_once(archiver_config const& c,
                                            time_zone const& tz,
                                            collector_clock const& clock,
                                            bool const force) {
  auto const fetched_at = clock.now_();
  auto const day = format_iso_date(tz.local_date(fetched_at));
  auto const path = c.archive_root_ / "gtfs" / (day + ".zip");
  if (!force && fs::exists(path)) {
    log::debug("timetable_present", {{"path", path.string()}});
    return {timetable_fetch_status::already_present, std::nullopt};
  }

  auto const res = fetch_url(c.timetable_url_, c, clock);
  if (!res.body_) {
    log::error("timetable_fetch_failed", {{"url", c.timetable_url_},
                                          {"status", res.status_},
                                          {"attempts", res.attempts_},
                                          {"error", res.error_}});
    return {timetable_fetch_status::failed, std::nullopt};
  }

  auto const& body = *res.body_;
  auto e = archive_entry{fetched_at, archive_kind::timetable_daily, path,
                         body.size(), sha256_hex(body)};

  if (!zip::has_zip_magic(body)) {
    e.path_ = c.archive_root_ / "gtfs" / "quarantine" /
              (day + "." +
               std::to_string(fetched_at.time_since_epoch().count()) + ".zip");
    write_file_atomic(e.path_, body, false);
    log::error("timetable_quarantined",
               {{"path", e.path_.string()}, {"bytes", body.size()}});
    return {timetable_fetch_status::quarantined, std::move(e)};
  }

  if (force) {
    // Forced refetch keeps the earlier copy under a distinct name.
    auto const prior = c.archive_root_ / "gtfs" / "superseded" /
                       (day + "." +
                        std::to_string(fetched_at.time_since_epoch().count()) +
                        ".zip");
    if (fs::exists(path)) {
      write_file_atomic(prior, read_file(path), false);
    }
  }
  write_file_atomic(path, body, force);
  log::info("timetable_written", {{"path", path.string()},
                                  {"bytes", e.byte_size_},
                                  {"sha256", e.content_hash_}});
  return {timetable_fetch_status::fetched, std::move(e)};
}

std::size_t run_rt_collector(archiver_config const& c, std::stop_token stop,
                             collector_clock const& clock,
                             std::optional<std::size_t> const max_polls) {
  auto const tz = time_zone::load(c.timezone_);
  auto const anchor = clock.now_();
  auto written = std::size_t{0U};
  for (auto n = std::size_t{0U}; !max_polls || n != *max_polls; ++n) {
    if (!clock.sleep_until_(anchor + c.poll_interval_ * static_cast<long>(n),
                            stop)) {
      break;
    }
    if (poll_rt_once(c, tz, clock)) {
      ++written;
    }
  }
  return written;
}

std::size_t run_timetable_collector(archiver_config const& c,
                                    std::stop_token stop,
                                    collector_clock const& clock,
                                    bool const force,
                                    std::optional<std::size_t> const max_checks) {
  auto const tz = time_zone::load(c.timezone_);
  auto const anchor = clock.now_();
  auto fetched = std::size_t{0U};
  for (auto n = std::size_t{0U}; !max_checks || n != *max_checks; ++n) {
    if (!clock.sleep_until_(
            anchor + c.timetable_check_interval_ * static_cast<long>(n), stop)) {
      break;
    }
    // force applies to the first check only; later checks are idempotent.
    auto const r = fetch_timetable_once(c, tz, clock, force && n == 0U);
    if (r.status_ == timetable_fetch_status::fetched) {
      ++fetched;
    }
  }
  return fetched;
}

}  // namespace rtc
