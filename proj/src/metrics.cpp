#include "rtc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "rtc/csv.hpp"
#include "rtc/error.hpp"
#include "rtc/log.hpp"

namespace rtc {

double quantile_sorted(std::span<double const> sorted, double const q) {
  if (sorted.empty()) {
    throw invalid_parameter{"quantile of empty input"};
  }
  auto const pos = q * static_cast<double>(sorted.size() - 1U);
  auto const lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1U >= sorted.size()) {
    return sorted.back();
  }
  auto const frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1U] - sorted[lo]);
}

summary_stats summarize(std::span<double const> values) {
  if (values.empty()) {
    throw invalid_parameter{"cannot summarize an empty list"};
  }
  auto sorted = std::vector<double>{begin(values), end(values)};
  std::sort(begin(sorted), end(sorted));

  auto const n = static_cast<double>(sorted.size());
  auto const mean = std::accumulate(begin(sorted), end(sorted), 0.0) / n;
  auto sq = 0.0;
  for (auto const v : sorted) {
    sq += (v - mean) * (v - mean);
  }

  auto s = summary_stats{};
  s.count_ = sorted.size();
  s.mean_ = mean;
  s.std_dev_ = std::sqrt(sq / n);
  s.minimum_ = sorted.front();
  s.median_ = quantile_sorted(sorted, 0.5);
  s.p85_ = quantile_sorted(sorted, 0.85);
  return s;
}

nlohmann::json to_json(summary_stats const& s) {
  if (s.count_ == 0U) {
    return {{"count", 0},       {"mean", nullptr},   {"std_dev", nullptr},
            {"minimum", nullptr}, {"median", nullptr}, {"p85", nullptr}};
  }
  return {{"count", s.count_},     {"mean", s.mean_},     {"std_dev", s.std_dev_},
          {"minimum", s.minimum_}, {"median", s.median_}, {"p85", s.p85_}};
}

std::map<std::string, summary_stats> summarize_groups_csv(
    std::string_view content) {
  auto r = csv::reader{content};
  auto const key = r.column("group_key");
  auto const value = r.column("value_seconds");
  if (!key || !value) {
    throw invalid_parameter{
        "stats input needs columns group_key,value_seconds"};
  }
  auto groups = std::map<std::string, std::vector<double>>{};
  auto row = std::vector<std::string>{};
  while (r.next(row)) {
    auto const& v = row[*value];
    auto x = 0.0;
    auto const [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
      throw invalid_parameter{"line " + std::to_string(r.line()) +
                              ": bad value_seconds '" + v + "'"};
    }
    groups[row[*key]].push_back(x);
  }
  auto out = std::map<std::string, summary_stats>{};
  for (auto const& [k, vs] : groups) {
    out.emplace(k, summarize(vs));
  }
  return out;
}

delay_table_result delay_table(corrected_gtfs_bundle const& bundle,
                               snapshot_source const& schedule) {
  auto out = delay_table_result{};
  for (auto const& t : bundle.trips_) {
    auto const snap = t.source_snapshot_date_
                          ? schedule(*t.source_snapshot_date_)
                          : nullptr;
    auto const* trip = snap ? snap->find_trip(t.trip_id_) : nullptr;
    if (trip == nullptr) {
      ++out.trips_skipped_;
      log::warn("delay_source_missing", {{"trip_id", t.trip_id_}});
      continue;
    }
    for (auto const& st : t.stop_times_) {
      if (st.provenance_ != provenance::matched) {
        continue;
      }
      auto const sched = std::find_if(
          begin(trip->stop_times_), end(trip->stop_times_),
          [&](auto const& s) { return s.stop_sequence_ == st.stop_sequence_; });
      if (sched == end(trip->stop_times_)) {
        continue;
      }
      out.records_.push_back(stop_delay_record{
          st.stop_id_, t.trip_id_, bundle.service_date_, st.stop_sequence_,
          st.corrected_ - sched->arrival_});
    }
  }
  return out;
}

std::string delays_to_csv(std::span<stop_delay_record const> records) {
  auto w = csv::writer{};
  w.row({"service_date", "trip_id", "stop_sequence", "stop_id",
         "delay_seconds"});
  for (auto const& r : records) {
    w.row({format_iso_date(r.service_date_), r.trip_id_,
           std::to_string(r.stop_sequence_), r.stop_id_,
           std::to_string(r.delay_)});
  }
  return w.release();
}

}  // namespace rtc
