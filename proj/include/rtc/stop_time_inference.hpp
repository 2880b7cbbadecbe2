#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtc/model.hpp"
#include "rtc/stop_matcher.hpp"
#include "rtc/time.hpp"

namespace rtc {

enum class provenance {
  matched,
  interpolated,
  extrapolated_backward,
  extrapolated_forward
};

std::string_view to_string(provenance);
std::optional<provenance> parse_provenance(std::string_view);

struct corrected_stop_time {
  std::string stop_id_;
  std::uint32_t stop_sequence_{0U};
  service_time scheduled_;
  service_time corrected_;
  provenance provenance_{provenance::matched};
  // Bumped to predecessor + 1 s to keep corrected times strictly increasing.
  bool adjusted_{false};
};

struct corrected_trip {
  std::string trip_id_;
  std::string route_id_;
  std::string headsign_;
  std::string direction_id_;
  std::optional<date> source_snapshot_date_;
  date service_date_;
  std::vector<corrected_stop_time> stop_times_;
  std::size_t match_count_{0U};
  std::size_t monotonicity_adjustments_{0U};
};

// Observed service times keyed by stop_sequence.
using observed_times = std::map<std::uint32_t, service_time>;

observed_times to_observed_times(reduced_matches const& matches,
                                 service_day const& day);

// Replaces scheduled arrival times with observed ones and fills unmatched
// stops: linear interpolation in scheduled time between the nearest matched
// neighbours, otherwise a constant shift by the deviation at the single
// nearest matched stop. Returns nullopt when fewer than min_matches stops
// were observed. Throws contract_violation for min_matches == 0 with no
// observations.
std::optional<corrected_trip> infer_stop_times(scheduled_trip const& trip,
                                               observed_times const& observed,
                                               std::size_t min_matches,
                                               date service_date);

}  // namespace rtc
