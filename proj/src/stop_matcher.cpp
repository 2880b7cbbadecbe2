#include "rtc/stop_matcher.hpp"

#include <cmath>
#include <cstdio>

#include "rtc/csv.hpp"
#include "rtc/error.hpp"

namespace rtc {

matcher_config make_matcher_config(double const radius_m) {
  return matcher_config{radius_m, meters_to_angular_threshold(radius_m)};
}

std::vector<trip_stop> resolve_trip_stops(scheduled_trip const& trip,
                                          timetable_snapshot const& snapshot,
                                          std::size_t& unresolved) {
  auto out = std::vector<trip_stop>{};
  out.reserve(trip.stop_times_.size());
  for (auto const& st : trip.stop_times_) {
    auto const* s = snapshot.find_stop(st.stop_id_);
    if (s == nullptr) {
      ++unresolved;
      continue;
    }
    out.push_back(trip_stop{s->id_, s->location_, st.stop_sequence_});
  }
  return out;
}

std::vector<trip_stop> coarse_filter(geo_point const& p,
                                     std::span<trip_stop const> stops,
                                     double const delta_deg) {
  auto const cos_lat = std::cos(to_radians(p.lat_));
  auto out = std::vector<trip_stop>{};
  for (auto const& s : stops) {
    if (in_coarse_box(p, s.location_, delta_deg, cos_lat)) {
      out.push_back(s);
    }
  }
  return out;
}

std::optional<stop_match> match_observation(
    vehicle_position_record const& record, std::string_view trip_id,
    std::span<trip_stop const> stops, matcher_config const& config) {
  auto const& p = record.position_;
  auto const cos_lat = std::cos(to_radians(p.lat_));

  trip_stop const* best = nullptr;
  auto best_distance = 0.0;
  for (auto const& s : stops) {
    if (!in_coarse_box(p, s.location_, config.delta_deg_, cos_lat)) {
      continue;
    }
    auto const d = great_circle_distance(p, s.location_);
    if (best == nullptr || d < best_distance - kDistanceTieEpsilon ||
        (d <= best_distance + kDistanceTieEpsilon &&
         s.stop_sequence_ < best->stop_sequence_)) {
      best = &s;
      best_distance = d;
    }
  }
  if (best == nullptr) {
    return std::nullopt;
  }
  return stop_match{std::string{trip_id}, std::string{best->stop_id_},
                    best->stop_sequence_, best_distance, record.observed_at_};
}

reduced_matches reduce_matches(std::span<stop_match const> matches) {
  auto out = reduced_matches{};
  for (auto const& m : matches) {
    auto const [it, inserted] = out.by_sequence_.emplace(m.stop_sequence_, m);
    if (inserted) {
      continue;
    }
    auto& cur = it->second;
    if (m.matched_distance_ < cur.matched_distance_ ||
        (m.matched_distance_ == cur.matched_distance_ &&
         m.observed_at_ < cur.observed_at_)) {
      cur = m;
    }
  }

  auto& by_seq = out.by_sequence_;
  auto repaired = false;
  while (!repaired) {
    repaired = true;
    if (by_seq.size() < 2U) {
      break;
    }
    for (auto prev = begin(by_seq), cur = std::next(prev); cur != end(by_seq);
         prev = cur, ++cur) {
      if (cur->second.observed_at_ > prev->second.observed_at_) {
        continue;
      }
      auto const drop = cur->second.matched_distance_ >=
                                prev->second.matched_distance_
                            ? cur
                            : prev;
      by_seq.erase(drop);
      ++out.monotonicity_discards_;
      repaired = false;
      break;
    }
  }
  return out;
}

std::string matches_to_csv(std::span<stop_match const> matches) {
  auto w = csv::writer{};
  w.row({"trip_id", "stop_id", "stop_sequence", "matched_distance_m",
         "observed_at"});
  char dist[32];
  for (auto const& m : matches) {
    std::snprintf(dist, sizeof(dist), "%.2f", m.matched_distance_);
    w.row({m.trip_id_, m.stop_id_, std::to_string(m.stop_sequence_), dist,
           std::to_string(m.observed_at_.time_since_epoch().count())});
  }
  return w.release();
}

}  // namespace rtc
