#include "rtc/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "rtc/error.hpp"
#include "rtc/file_util.hpp"
#include "rtc/log.hpp"
#include "rtc/stop_matcher.hpp"
#include "rtc/stop_time_inference.hpp"

namespace fs = std::filesystem;

namespace rtc {

void validate(pipeline_config const& c) {
  if (!(c.radius_m_ > 0.0)) {
    throw invalid_parameter{"radius_m must be positive"};
  }
  if (c.window_before_ < 0 || c.window_after_ < 0 || c.window_before_ > 366 ||
      c.window_after_ > 366) {
    throw invalid_parameter{"window sizes must be within [0, 366]"};
  }
  if (c.worker_count_ == 0U) {
    throw invalid_parameter{"worker_count must be at least 1"};
  }
  if (c.archive_root_.empty() || c.work_root_.empty()) {
    throw invalid_parameter{"archive_root and work_root are required"};
  }
  time_zone::load(c.timezone_);  // throws invalid_parameter when unknown
}

fs::path bundle_path(fs::path const& work_root, date const d) {
  return work_root / "corrected" / (format_iso_date(d) + ".gtfs.zip");
}

fs::path report_path(fs::path const& work_root, date const d) {
  return work_root / "reports" / (format_iso_date(d) + ".json");
}

fs::path positions_path(fs::path const& work_root, date const d) {
  return work_root / "positions" / (format_iso_date(d) + ".csv");
}

namespace {

struct trip_work {
  std::string trip_id_;
  resolution_outcome outcome_;
  std::vector<std::size_t> records_;
};

struct trip_result {
  std::optional<corrected_trip> corrected_;
  matching_stats stats_;
  std::vector<stop_match> matches_;
};

trip_result process_trip(trip_work const& w,
                         daily_position_table const& positions,
                         service_day const& day, matcher_config const& mc,
                         std::size_t const min_matches, bool const keep) {
  auto r = trip_result{};
  auto& s = r.stats_;
  s.trips_observed_ = 1U;

  auto const stops =
      resolve_trip_stops(*w.outcome_.trip_, *w.outcome_.snapshot_,
                         s.stop_lookup_failures_);

  auto matches = std::vector<stop_match>{};
  for (auto const idx : w.records_) {
    auto const& rec = positions.records_[idx];
    ++s.observations_;
    auto const delta = (rec.observed_at_ - day.reference_).count();
    if (delta < -6 * 3600 || delta > 30 * 3600) {
      ++s.out_of_window_;
      continue;
    }
    if (auto m = match_observation(rec, w.trip_id_, stops, mc)) {
      ++s.matched_;
      matches.push_back(std::move(*m));
    } else {
      ++s.unmatched_;
    }
  }

  auto const reduced = reduce_matches(matches);
  s.monotonicity_discards_ = reduced.monotonicity_discards_;
  if (keep) {
    r.matches_ = std::move(matches);
  }

  auto const observed = to_observed_times(reduced, day);
  if (observed.empty() || observed.size() < min_matches) {
    ++s.trips_below_min_matches_;
    return r;
  }
  r.corrected_ = infer_stop_times(*w.outcome_.trip_, observed, min_matches,
                                  day.date_);
  if (r.corrected_) {
    r.corrected_->source_snapshot_date_ = w.outcome_.source_snapshot_date_;
    ++s.trips_emitted_;
  } else {
    ++s.trips_below_min_matches_;
  }
  return r;
}

}  // namespace

day_output correct_day(daily_position_table const& positions,
                       resolution_window& window, time_zone const& tz,
                       pipeline_config const& config, bool const keep_matches) {
  auto out = day_output{};
  auto& stats = out.stats_;
  stats.service_date_ = positions.service_date_;
  stats.ingest_ = positions.stats_;

  auto by_trip = std::map<std::string, std::vector<std::size_t>>{};
  for (auto i = std::size_t{0U}; i != positions.records_.size(); ++i) {
    auto const& rec = positions.records_[i];
    ++stats.resolution_.records_;
    if (!rec.trip_id_ || rec.trip_id_->empty()) {
      ++stats.resolution_.no_trip_id_;
      continue;
    }
    by_trip[*rec.trip_id_].push_back(i);
  }
  stats.resolution_.distinct_trip_ids_ = by_trip.size();

  auto work = std::vector<trip_work>{};
  for (auto& [trip_id, records] : by_trip) {
    auto outcome = window.resolve(trip_id);
    switch (outcome.status_) {
      case resolution_status::resolved_same_day:
        stats.resolution_.resolved_same_day_ += records.size();
        break;
      case resolution_status::resolved_window:
        stats.resolution_.resolved_window_ += records.size();
        break;
      default: stats.resolution_.unknown_trip_id_ += records.size(); break;
    }
    if (outcome.resolved()) {
      work.push_back(trip_work{trip_id, std::move(outcome), std::move(records)});
    }
  }
  stats.resolution_.window_days_missing_ = window.missing_days();
  stats.resolution_.window_loads_failed_ = window.failed_loads();
  stats.resolution_.same_day_inactive_trips_ = window.same_day_inactive();

  auto const day = make_service_day(positions.service_date_, tz);
  auto const mc = make_matcher_config(config.radius_m_);
  auto results = std::vector<trip_result>(work.size());
  parallel_for(work.size(), config.worker_count_, [&](std::size_t const i) {
    results[i] = process_trip(work[i], positions, day, mc, config.min_matches_,
                              keep_matches);
  });

  auto corrected = std::vector<corrected_trip>{};
  for (auto& r : results) {
    stats.matching_ += r.stats_;
    if (r.corrected_) {
      stats.inference_.add(*r.corrected_);
      corrected.push_back(std::move(*r.corrected_));
    }
    if (keep_matches) {
      std::move(begin(r.matches_), end(r.matches_),
                std::back_inserter(out.matches_));
    }
  }

  // Target first, then window snapshots that actually supplied trips, in
  // probe order.
  auto by_date = std::map<std::chrono::sys_days,
                          std::shared_ptr<timetable_snapshot const>>{};
  for (auto const& w : work) {
    by_date[std::chrono::sys_days{w.outcome_.snapshot_->snapshot_date_}] =
        w.outcome_.snapshot_;
  }
  auto sources = std::vector<std::shared_ptr<timetable_snapshot const>>{
      window.target()};
  for (auto const offset : window.available_offsets()) {
    auto const d = std::chrono::sys_days{add_days(window.target_date(), offset)};
    if (auto const it = by_date.find(d); offset != 0 && it != end(by_date)) {
      sources.push_back(it->second);
    }
  }

  out.bundle_ = assemble_bundle(positions.service_date_, std::move(corrected),
                                sources, tz.name());
  return out;
}

day_result run_day(pipeline_config const& config, date const d) {
  auto result = day_result{};
  result.date_ = d;
  auto const date_str = format_iso_date(d);

  auto fail = [&](int const code, std::string msg) {
    log::error("day_failed",
               {{"date", date_str}, {"exit_code", code}, {"error", msg}});
    result.exit_code_ = code;
    result.message_ = std::move(msg);
    return result;
  };

  auto const tz = time_zone::load(config.timezone_);

  auto const tt_file = timetable_path(config.archive_root_, d);
  auto const rt_dir = config.archive_root_ / "rt" / date_str;
  if (!fs::exists(tt_file)) {
    return fail(kExitMissingArchive, "missing timetable " + tt_file.string());
  }
  if (!fs::is_directory(rt_dir)) {
    return fail(kExitMissingArchive,
                "missing realtime snapshots " + rt_dir.string());
  }

  log::info("day_start", {{"date", date_str}});
  auto const positions = ingest_day(config.archive_root_, d, config.worker_count_);
  log::info("ingest_done",
            {{"date", date_str},
             {"snapshots", positions.stats_.snapshots_read_},
             {"parse_failures", positions.stats_.parse_failures_},
             {"raw_records", positions.stats_.raw_records_},
             {"deduplicated_records", positions.stats_.deduplicated_records_}});
  if (positions.stats_.parse_failures_ != 0U) {
    log::warn("snapshot_parse_failures",
              {{"date", date_str}, {"count", positions.stats_.parse_failures_}});
  }

  auto window = std::unique_ptr<resolution_window>{};
  try {
    window = resolution_window::build(config.archive_root_, d,
                                      config.window_before_,
                                      config.window_after_);
  } catch (not_found const& e) {
    return fail(kExitMissingArchive, e.what());
  } catch (std::exception const& e) {
    return fail(kExitFatalLoad, e.what());
  }

  auto output = day_output{};
  try {
    output = correct_day(positions, *window, tz, config, config.export_matches_);
  } catch (contract_violation const& e) {
    return fail(kExitFatalLoad, e.what());
  }

  result.bundle_path_ = bundle_path(config.work_root_, d);
  result.report_path_ = report_path(config.work_root_, d);
  try {
    write_bundle(output.bundle_, result.bundle_path_);
    write_run_report(output.stats_, result.report_path_);
    if (config.export_positions_) {
      export_daily_csv(positions, positions_path(config.work_root_, d));
    }
    if (config.export_matches_) {
      write_file_atomic(config.work_root_ / "matches" / (date_str + ".csv"),
                        matches_to_csv(output.matches_));
    }
  } catch (io_error const& e) {
    return fail(kExitWriteFailure, e.what());
  }

  auto const& s = output.stats_;
  log::info("day_done", {{"date", date_str},
                         {"trips_emitted", s.matching_.trips_emitted_},
                         {"bundle", result.bundle_path_.string()},
                         {"report", result.report_path_.string()}});
  result.stats_ = output.stats_;
  return result;
}

std::vector<day_result> run_range(pipeline_config const& config,
                                  date const start, date const end,
                                  std::ostream* summary) {
  if (std::chrono::sys_days{end} < std::chrono::sys_days{start}) {
    throw invalid_parameter{"range end precedes start"};
  }
  auto results = std::vector<day_result>{};
  for (auto d = start; std::chrono::sys_days{d} <= std::chrono::sys_days{end};
       d = add_days(d, 1)) {
    try {
      results.push_back(run_day(config, d));
    } catch (io_error const& e) {
      auto r = day_result{};
      r.date_ = d;
      r.exit_code_ = kExitWriteFailure;
      r.message_ = e.what();
      results.push_back(std::move(r));
    }
  }

  if (summary != nullptr) {
    char line[160];
    *summary << "date        exit  records   resolved  trips_out  stop_times\n";
    for (auto const& r : results) {
      if (r.stats_) {
        auto const& s = *r.stats_;
        std::snprintf(line, sizeof(line), "%s  %4d  %8zu  %8zu  %9zu  %10zu\n",
                      format_iso_date(r.date_).c_str(), r.exit_code_,
                      s.resolution_.records_,
                      s.resolution_.resolved_same_day_ +
                          s.resolution_.resolved_window_,
                      s.matching_.trips_emitted_, s.inference_.stop_times_);
      } else {
        std::snprintf(line, sizeof(line), "%s  %4d  %s\n",
                      format_iso_date(r.date_).c_str(), r.exit_code_,
                      r.message_.c_str());
      }
      *summary << line;
    }
  }
  return results;
}

}  // namespace rtc
