#include <atomic>
#include <sstream>
#include <thread>

#include "gtest/gtest.h"

#include "httplib.h"

#include "rtc/archiver.hpp"
#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/log.hpp"

#include "support.hpp"

using namespace rtc;
using namespace std::chrono;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

constexpr auto kStart = std::int64_t{1720450000};  // 2024-07-08 14:46:40 UTC

// Local HTTP stub on an ephemeral port.
class stub_server {
public:
  stub_server() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread{[this] { server_.listen_after_bind(); }};
    server_.wait_until_ready();
  }
  ~stub_server() { server_.stop(); }

  httplib::Server& operator*() { return server_; }
  std::string url(std::string const& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

private:
  httplib::Server server_;
  int port_{0};
  std::jthread thread_;
};

// Simulated time: sleeping jumps straight to the deadline; the run ends
// once `limit` is reached.
struct sim_clock {
  std::int64_t now_{kStart};
  std::int64_t limit_{kStart + 300};
  std::vector<milliseconds> backoffs_;

  collector_clock get() {
    return collector_clock{
        .now_ = [this] { return unixtime{seconds{now_}}; },
        .sleep_until_ =
            [this](unixtime t, std::stop_token const&) {
              if (t.time_since_epoch().count() >= limit_) {
                return false;
              }
              now_ = std::max(now_, t.time_since_epoch().count());
              return true;
            },
        .backoff_ = [this](milliseconds d) { backoffs_.push_back(d); }};
  }
};

archiver_config config_for(test::temp_dir const& dir, stub_server const& s) {
  auto c = archiver_config{};
  c.rt_feed_url_ = s.url("/rt");
  c.timetable_url_ = s.url("/gtfs.zip");
  c.archive_root_ = dir.path();
  c.timezone_ = "UTC";
  c.retry_.max_attempts_ = 1;
  c.retry_.backoff_base_ = 10ms;
  return c;
}

std::vector<fs::path> snapshots(test::temp_dir const& dir) {
  auto out = std::vector<fs::path>{};
  for (auto const& e : fs::recursive_directory_iterator{dir.path() / "rt"}) {
    if (e.is_regular_file()) {
      out.push_back(e.path());
    }
  }
  std::sort(begin(out), end(out));
  return out;
}

}  // namespace

TEST(rt_collector, five_minutes_at_thirty_seconds_gives_ten_files) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  (*server).Get("/rt", [](auto const&, httplib::Response& res) {
    res.set_content("fixed-bytes", "application/x-protobuf");
  });
  auto clock = sim_clock{};
  auto const c = config_for(dir, server);
  EXPECT_EQ(run_rt_collector(c, {}, clock.get()), 10U);

  auto const files = snapshots(dir);
  ASSERT_EQ(files.size(), 10U);
  auto prev = std::optional<std::int64_t>{};
  for (auto const& f : files) {
    EXPECT_EQ(f.parent_path().filename(), "2024-07-08");
    EXPECT_EQ(read_file(f), "fixed-bytes");  // identical payloads, distinct files
    auto const epoch = std::stoll(f.stem().string());
    if (prev) {
      EXPECT_NEAR(static_cast<double>(epoch - *prev), 30.0, 1.0);
    }
    prev = epoch;
  }
}

TEST(rt_collector, failed_poll_is_skipped) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  auto hits = std::atomic_int{0};
  (*server).Get("/rt", [&](auto const&, httplib::Response& res) {
    if (++hits == 2) {
      res.status = 500;
      return;
    }
    res.set_content("ok", "application/octet-stream");
  });
  auto clock = sim_clock{};
  clock.limit_ = kStart + 90;
  auto log_out = std::ostringstream{};
  log::set_sink(&log_out);
  EXPECT_EQ(run_rt_collector(config_for(dir, server), {}, clock.get()), 2U);
  log::set_sink(nullptr);

  auto const files = snapshots(dir);
  ASSERT_EQ(files.size(), 2U);
  EXPECT_EQ(files[0].stem(), std::to_string(kStart));
  EXPECT_EQ(files[1].stem(), std::to_string(kStart + 60));
  EXPECT_NE(log_out.str().find("rt_fetch_failed"), std::string::npos);
}

TEST(rt_collector, retries_server_errors_with_backoff) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  auto hits = std::atomic_int{0};
  (*server).Get("/rt", [&](auto const&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 503;
      return;
    }
    res.set_content("late", "application/octet-stream");
  });
  auto clock = sim_clock{};
  auto c = config_for(dir, server);
  c.retry_.max_attempts_ = 3;
  auto const tz = time_zone::load("UTC");
  auto const e = poll_rt_once(c, tz, clock.get());
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(hits.load(), 3);
  EXPECT_EQ(clock.backoffs_, (std::vector<milliseconds>{10ms, 20ms}));
  EXPECT_EQ(e->kind_, archive_kind::rt_snapshot);
  EXPECT_EQ(e->byte_size_, 4U);
  EXPECT_EQ(e->content_hash_, sha256_hex("late"));
  EXPECT_EQ(read_file(e->path_), "late");

  // 4xx is final.
  auto missing = c;
  missing.rt_feed_url_ = server.url("/absent");
  clock.now_ += 30;
  EXPECT_FALSE(poll_rt_once(missing, tz, clock.get()).has_value());
}

TEST(rt_collector, existing_snapshot_is_never_overwritten) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  (*server).Get("/rt", [](auto const&, httplib::Response& res) {
    res.set_content("new", "application/octet-stream");
  });
  auto clock = sim_clock{};
  auto const tz = time_zone::load("UTC");
  auto const c = config_for(dir, server);
  auto const path = rt_snapshot_path(dir.path(), 2024y / July / 8, unixtime{seconds{kStart}});
  write_file_atomic(path, "old");
  EXPECT_FALSE(poll_rt_once(c, tz, clock.get()).has_value());
  EXPECT_EQ(read_file(path), "old");
}

TEST(rt_collector, api_key_placement) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  auto seen_query = std::string{};
  auto seen_header = std::string{};
  (*server).Get("/rt", [&](httplib::Request const& req, httplib::Response& res) {
    seen_query = req.get_param_value("key");
    seen_header = req.get_header_value("X-Key");
    res.set_content("x", "text/plain");
  });
  auto clock = sim_clock{};
  auto c = config_for(dir, server);
  c.api_key_ = "s3cret&=";
  c.api_key_name_ = "key";
  EXPECT_TRUE(fetch_url(c.rt_feed_url_, c, clock.get()).body_.has_value());
  EXPECT_EQ(seen_query, "s3cret&=");

  c.api_key_name_ = "X-Key";
  c.api_key_placement_ = api_key_placement::header;
  EXPECT_TRUE(fetch_url(c.rt_feed_url_, c, clock.get()).body_.has_value());
  EXPECT_EQ(seen_header, "s3cret&=");
}

TEST(timetable_collector, fetches_once_per_day) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  auto hits = std::atomic_int{0};
  auto const zip = test::make_zip(test::minimal_gtfs());
  (*server).Get("/gtfs.zip", [&](auto const&, httplib::Response& res) {
    ++hits;
    res.set_content(zip, "application/zip");
  });
  auto clock = sim_clock{};
  auto const tz = time_zone::load("UTC");
  auto const c = config_for(dir, server);

  auto const first = fetch_timetable_once(c, tz, clock.get(), false);
  EXPECT_EQ(first.status_, timetable_fetch_status::fetched);
  auto const path = dir.path() / "gtfs" / "2024-07-08.zip";
  EXPECT_EQ(read_file(path), zip);
  ASSERT_TRUE(first.entry_.has_value());
  EXPECT_EQ(first.entry_->content_hash_, sha256_hex(zip));

  clock.now_ += 3600;
  auto const second = fetch_timetable_once(c, tz, clock.get(), false);
  EXPECT_EQ(second.status_, timetable_fetch_status::already_present);
  EXPECT_EQ(hits.load(), 1);

  auto const forced = fetch_timetable_once(c, tz, clock.get(), true);
  EXPECT_EQ(forced.status_, timetable_fetch_status::fetched);
  EXPECT_EQ(hits.load(), 2);
  EXPECT_TRUE(fs::exists(dir.path() / "gtfs" / "superseded"));
}

TEST(timetable_collector, corrupt_download_is_quarantined) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  auto const zip = test::make_zip(test::minimal_gtfs());
  (*server).Get("/gtfs.zip", [&](auto const&, httplib::Response& res) {
    res.set_content(zip.substr(7, 100), "application/zip");  // bad magic
  });
  auto clock = sim_clock{};
  auto log_out = std::ostringstream{};
  log::set_sink(&log_out);
  auto const r = fetch_timetable_once(config_for(dir, server), time_zone::load("UTC"),
                                      clock.get(), false);
  log::set_sink(nullptr);
  EXPECT_EQ(r.status_, timetable_fetch_status::quarantined);
  EXPECT_FALSE(fs::exists(dir.path() / "gtfs" / "2024-07-08.zip"));
  ASSERT_TRUE(r.entry_.has_value());
  EXPECT_EQ(r.entry_->path_.parent_path(), dir.path() / "gtfs" / "quarantine");
  EXPECT_EQ(read_file(r.entry_->path_), zip.substr(7, 100));
  EXPECT_NE(log_out.str().find("timetable_quarantined"), std::string::npos);
}

TEST(timetable_collector, periodic_checks_fetch_a_new_day) {
  auto dir = test::temp_dir{};
  auto server = stub_server{};
  auto const zip = test::make_zip(test::minimal_gtfs());
  (*server).Get("/gtfs.zip", [&](auto const&, httplib::Response& res) {
    res.set_content(zip, "application/zip");
  });
  auto clock = sim_clock{};
  clock.limit_ = kStart + 2 * 86400;
  auto c = config_for(dir, server);
  c.timetable_check_interval_ = 3600s;
  // Hourly checks from 14:46 on day one until 13:46 on day three.
  EXPECT_EQ(run_timetable_collector(c, {}, clock.get(), false), 3U);
  EXPECT_TRUE(fs::exists(dir.path() / "gtfs" / "2024-07-09.zip"));
  EXPECT_TRUE(fs::exists(dir.path() / "gtfs" / "2024-07-10.zip"));
}

TEST(archiver_config, file_then_environment) {
  auto dir = test::temp_dir{};
  write_file_atomic(dir / "a.ini",
                    "[archiver]\n"
                    "rt_feed_url = \"https://feeds.example/rt\"\n"
                    "timetable_url = https://feeds.example/gtfs.zip\n"
                    "poll_interval = 45\n"
                    "archive_root = /data/archive\n"
                    "api_key_placement = header\n"
                    "max_attempts = 5\n"
                    "backoff_base = 2\n");
  auto const env = [](char const* name) -> std::optional<std::string> {
    if (std::string_view{name} == "RTC_POLL_INTERVAL") {
      return "20";
    }
    if (std::string_view{name} == "RTC_API_KEY") {
      return "k";
    }
    return std::nullopt;
  };
  auto const c = load_archiver_config(dir / "a.ini", env);
  EXPECT_EQ(c.rt_feed_url_, "https://feeds.example/rt");
  EXPECT_EQ(c.timetable_url_, "https://feeds.example/gtfs.zip");
  EXPECT_EQ(c.poll_interval_, 20s);
  EXPECT_EQ(c.archive_root_, "/data/archive");
  EXPECT_EQ(c.api_key_, "k");
  EXPECT_EQ(c.api_key_placement_, api_key_placement::header);
  EXPECT_EQ(c.retry_.max_attempts_, 5);
  EXPECT_EQ(c.retry_.backoff_base_, 2000ms);

  auto bad = c;
  bad.archive_root_ = dir.path();
  EXPECT_NO_THROW(validate(bad));
  bad.poll_interval_ = 0s;
  EXPECT_THROW(validate(bad), invalid_parameter);

  write_file_atomic(dir / "b.ini", "poll_interval = soon\n");
  auto const no_env = [](char const*) { return std::optional<std::string>{}; };
  EXPECT_THROW(load_archiver_config(dir / "b.ini", no_env), invalid_parameter);
}

TEST(archiver, sha256_known_vector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
