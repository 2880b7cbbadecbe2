#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <mutex>

#include "CLI11.hpp"

#include "rtc/archiver.hpp"
#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/gtfs_model.hpp"
#include "rtc/log.hpp"
#include "rtc/metrics.hpp"
#include "rtc/pipeline.hpp"
#include "rtc/replay_gen.hpp"

namespace fs = std::filesystem;

namespace {

std::atomic_bool g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

rtc::date to_date(std::string const& s) {
  auto const d = rtc::parse_iso_date(s);
  if (!d) {
    throw CLI::ValidationError{"date", "expected YYYY-MM-DD, got " + s};
  }
  return *d;
}

auto const kIsoDate = CLI::Validator{
    [](std::string& s) {
      return rtc::parse_iso_date(s) ? std::string{} : "expected YYYY-MM-DD";
    },
    "DATE"};

rtc::collector_clock interruptible_clock() {
  auto c = rtc::system_collector_clock();
  auto inner = c.sleep_until_;
  c.sleep_until_ = [inner](rtc::unixtime const t, std::stop_token const& st) {
    auto src = std::stop_source{};
    auto watcher = std::jthread{[&](std::stop_token const self) {
      while (!self.stop_requested()) {
        if (g_interrupted || st.stop_requested()) {
          src.request_stop();
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds{100});
      }
    }};
    return inner(t, src.get_token());
  };
  return c;
}

void print_json(nlohmann::json const& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  auto app = CLI::App{"Realtime-corrected GTFS timetables from vehicle positions"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML configuration file");

  auto log_level = std::string{"info"};
  app.add_option("--log-level", log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  // archive rt | archive timetable
  auto* archive = app.add_subcommand("archive", "Collect feeds into the archive");
  archive->require_subcommand(1);
  auto archiver_file = std::string{};
  auto* archive_rt = archive->add_subcommand("rt", "Poll the vehicle-position feed");
  auto max_polls = std::size_t{0U};
  archive_rt->add_option("--archiver-config", archiver_file,
                         "Archiver INI file");
  archive_rt->add_option("--max-polls", max_polls, "Stop after N polls (0 = run)");
  auto* archive_tt =
      archive->add_subcommand("timetable", "Fetch the daily timetable");
  auto force = false;
  auto once = false;
  archive_tt->add_option("--archiver-config", archiver_file, "Archiver INI file");
  archive_tt->add_flag("--force", force, "Refetch even if today's file exists");
  archive_tt->add_flag("--once", once, "Check once and exit");

  // Options shared by the daily commands.
  auto pc = rtc::pipeline_config{};
  auto date_str = std::string{};
  auto end_date_str = std::string{};

  auto* ingest = app.add_subcommand("ingest", "Deduplicate one day's snapshots to CSV");
  ingest->add_option("--archive", pc.archive_root_, "Archive root")->required();
  ingest->add_option("--work", pc.work_root_, "Output root")->required();
  ingest->add_option("--date", date_str, "Service date")->required()->check(kIsoDate);
  ingest->add_option("--workers", pc.worker_count_, "Worker threads")
      ->check(CLI::PositiveNumber);

  auto* correct = app.add_subcommand("correct", "Build corrected GTFS bundles");
  correct->add_option("--archive", pc.archive_root_, "Archive root")->required();
  correct->add_option("--work", pc.work_root_, "Output root")->required();
  correct->add_option("--date", date_str, "Service date (or range start)")
      ->required()
      ->check(kIsoDate);
  correct->add_option("--end-date", end_date_str, "Inclusive range end")
      ->check(kIsoDate);
  correct->add_option("--timezone", pc.timezone_, "Feed time zone");
  correct->add_option("--radius-m", pc.radius_m_, "Match radius in metres")
      ->check(CLI::PositiveNumber);
  correct->add_option("--window-before", pc.window_before_, "Days before")
      ->check(CLI::Range(0, 366));
  correct->add_option("--window-after", pc.window_after_, "Days after")
      ->check(CLI::Range(0, 366));
  correct->add_option("--min-matches", pc.min_matches_, "Matches needed per trip");
  correct->add_option("--workers", pc.worker_count_, "Worker threads")
      ->check(CLI::PositiveNumber);
  correct->add_flag("--export-positions", pc.export_positions_,
                    "Also write the deduplicated positions CSV");
  correct->add_flag("--export-matches", pc.export_matches_,
                    "Also write the stop matches CSV");

  auto* validate = app.add_subcommand("validate-gtfs", "Load a GTFS ZIP and report issues");
  auto gtfs_path = std::string{};
  validate->add_option("zip", gtfs_path, "GTFS ZIP")->required()->check(CLI::ExistingFile);
  validate->add_option("--date", date_str, "Snapshot date")->check(kIsoDate);

  auto* stats = app.add_subcommand("stats", "Summary statistics per group");
  auto input = std::string{};
  stats->add_option("--input", input, "CSV with group_key,value_seconds")
      ->required()
      ->check(CLI::ExistingFile);

  auto* delays = app.add_subcommand("delays", "Matched-stop delays of a corrected bundle");
  auto bundle_file = std::string{};
  auto output = std::string{};
  delays->add_option("--bundle", bundle_file, "Corrected bundle ZIP")
      ->required()
      ->check(CLI::ExistingFile);
  delays->add_option("--archive", pc.archive_root_, "Archive root")->required();
  delays->add_option("--output", output, "CSV path (default stdout)");

  auto* replay = app.add_subcommand("replay-gen", "Generate a synthetic archive");
  auto ro = rtc::replay_options{};
  auto exact = false;
  auto truth_file = std::string{};
  replay->add_option("--archive", pc.archive_root_, "Archive root")->required();
  replay->add_option("--date", date_str, "Service date")->required()->check(kIsoDate);
  replay->add_option("--timezone", ro.timezone_, "Time zone");
  replay->add_option("--routes", ro.routes_, "Routes");
  replay->add_option("--trips-per-route", ro.trips_per_route_, "Trips per route");
  replay->add_option("--stops-per-route", ro.stops_per_route_, "Stops per route");
  replay->add_option("--stop-spacing-m", ro.stop_spacing_m_, "Stop spacing");
  replay->add_option("--scheduled-gap-s", ro.scheduled_gap_s_, "Scheduled gap");
  replay->add_option("--delay-constant", ro.delay_.constant_, "Delay intercept (s)");
  replay->add_option("--delay-per-seq", ro.delay_.per_sequence_,
                     "Delay slope per stop_sequence (s)");
  replay->add_option("--dropout", ro.dropout_, "Per-stop dropout probability")
      ->check(CLI::Range(0.0, 1.0));
  replay->add_flag("--exact-stops", exact, "Sample exactly at each stop");
  replay->add_option("--report-interval", ro.report_interval_s_, "Seconds");
  replay->add_option("--poll-interval", ro.poll_interval_s_, "Seconds");
  replay->add_option("--adjacent-day-share", ro.adjacent_day_share_,
                     "Share of trips only in the next day's timetable")
      ->check(CLI::Range(0.0, 1.0));
  replay->add_option("--corrupt-share", ro.corrupt_share_, "Share of corrupt snapshots")
      ->check(CLI::Range(0.0, 1.0));
  replay->add_option("--seed", ro.seed_, "Random seed");
  replay->add_option("--truth", truth_file, "Write ground truth CSV here");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    // Help and version requests exit 0; every other parse error is a usage error.
    auto const code = app.exit(e);
    return code == 0 ? rtc::kExitOk : rtc::kExitUsage;
  }

  rtc::log::set_level(rtc::log::parse_level(log_level));
  pc.log_level_ = log_level;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (archive_rt->parsed() || archive_tt->parsed()) {
      auto const cfg = rtc::load_archiver_config(
          archiver_file.empty() ? std::nullopt
                                : std::optional<fs::path>{archiver_file});
      rtc::validate(cfg);
      auto const clock = interruptible_clock();
      if (archive_rt->parsed()) {
        auto const n = rtc::run_rt_collector(
            cfg, {}, clock,
            max_polls == 0U ? std::nullopt : std::optional{max_polls});
        std::cout << "snapshots written: " << n << '\n';
      } else {
        auto const n = rtc::run_timetable_collector(
            cfg, {}, clock, force,
            once ? std::optional<std::size_t>{1U} : std::nullopt);
        std::cout << "timetables written: " << n << '\n';
      }
      return rtc::kExitOk;
    }

    if (ingest->parsed()) {
      auto const d = to_date(date_str);
      auto const table = rtc::ingest_day(pc.archive_root_, d, pc.worker_count_);
      auto const path = rtc::positions_path(pc.work_root_, d);
      rtc::export_daily_csv(table, path);
      std::cout << "snapshots " << table.stats_.snapshots_read_
                << ", parse failures " << table.stats_.parse_failures_
                << ", raw " << table.stats_.raw_records_ << ", deduplicated "
                << table.stats_.deduplicated_records_ << " -> " << path.string()
                << '\n';
      return rtc::kExitOk;
    }

    if (correct->parsed()) {
      rtc::validate(pc);
      auto const start = to_date(date_str);
      if (end_date_str.empty()) {
        auto const r = rtc::run_day(pc, start);
        if (r.exit_code_ == rtc::kExitOk) {
          std::cout << r.bundle_path_.string() << '\n'
                    << r.report_path_.string() << '\n';
        }
        return r.exit_code_;
      }
      auto const results =
          rtc::run_range(pc, start, to_date(end_date_str), &std::cout);
      auto code = rtc::kExitOk;
      for (auto const& r : results) {
        code = std::max(code, r.exit_code_);
      }
      return code;
    }

    if (validate->parsed()) {
      auto const d = date_str.empty()
                         ? rtc::parse_iso_date(fs::path{gtfs_path}.stem().string())
                               .value_or(rtc::date{std::chrono::floor<std::chrono::days>(
                                   std::chrono::system_clock::now())})
                         : to_date(date_str);
      try {
        auto const tt = rtc::load_timetable(gtfs_path, d);
        auto const& s = tt.stats_;
        auto j = nlohmann::json{{"stops", s.stops_},
                                {"routes", s.routes_},
                                {"trips", s.trips_},
                                {"stop_times", s.stop_times_},
                                {"issues", s.issues_},
                                {"sample_warnings", s.sample_warnings_},
                                {"active_services", tt.active_service_ids(d).size()}};
        print_json(j);
        return rtc::kExitOk;
      } catch (rtc::load_error const& e) {
        std::cerr << "invalid GTFS: " << e.what() << '\n';
        return rtc::kExitFatalLoad;
      }
    }

    if (stats->parsed()) {
      auto const groups = rtc::summarize_groups_csv(rtc::read_file(input));
      auto j = nlohmann::json::object();
      for (auto const& [key, s] : groups) {
        j[key] = rtc::to_json(s);
      }
      print_json(j);
      return rtc::kExitOk;
    }

    if (delays->parsed()) {
      auto const bundle = rtc::read_bundle(bundle_file);
      auto cache = std::map<std::string, std::shared_ptr<rtc::timetable_snapshot const>>{};
      auto const source = [&](rtc::date const d)
          -> std::shared_ptr<rtc::timetable_snapshot const> {
        auto const key = rtc::format_iso_date(d);
        if (auto const it = cache.find(key); it != end(cache)) {
          return it->second;
        }
        auto snap = std::shared_ptr<rtc::timetable_snapshot const>{};
        auto const path = rtc::timetable_path(pc.archive_root_, d);
        if (fs::exists(path)) {
          try {
            snap = std::make_shared<rtc::timetable_snapshot const>(
                rtc::load_timetable(path, d));
          } catch (rtc::load_error const& e) {
            rtc::log::warn("timetable_load_failed",
                           {{"path", path.string()}, {"error", e.what()}});
          }
        }
        return cache[key] = snap;
      };
      auto const table = rtc::delay_table(bundle, source);
      auto const csv = rtc::delays_to_csv(table.records_);
      if (output.empty()) {
        std::cout << csv;
      } else {
        rtc::write_file_atomic(output, csv);
      }
      if (table.trips_skipped_ != 0U) {
        rtc::log::warn("delay_trips_skipped", {{"count", table.trips_skipped_}});
      }
      return rtc::kExitOk;
    }

    if (replay->parsed()) {
      ro.service_date_ = to_date(date_str);
      ro.sampling_ = exact ? rtc::sampling_mode::exact_stops
                           : rtc::sampling_mode::interval;
      auto const s = rtc::generate_replay(ro, pc.archive_root_);
      if (!truth_file.empty()) {
        rtc::write_file_atomic(truth_file, rtc::truth_to_csv(s.truth_));
      }
      std::cout << "trips " << s.trips_ << " (adjacent-only "
                << s.adjacent_only_trips_ << "), stops " << s.stops_
                << ", reports " << s.reports_ << ", snapshots " << s.snapshots_
                << " (corrupt " << s.corrupted_snapshots_ << ")\n";
      return rtc::kExitOk;
    }
  } catch (rtc::io_error const& e) {
    rtc::log::error("io_failure", {{"error", e.what()}});
    return rtc::kExitWriteFailure;
  } catch (rtc::invalid_parameter const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rtc::kExitUsage;
  } catch (rtc::error const& e) {
    rtc::log::error("failure", {{"error", e.what()}});
    return rtc::kExitFatalLoad;
  }
  return rtc::kExitUsage;
}
