#include "rtc/stop_time_inference.hpp"

#include "rtc/error.hpp"

namespace rtc {

std::string_view to_string(provenance const p) {
  switch (p) {
    case provenance::matched: return "matched";
    case provenance::interpolated: return "interpolated";
    case provenance::extrapolated_backward: return "extrapolated_backward";
    case provenance::extrapolated_forward: return "extrapolated_forward";
  }
  return "matched";
}

std::optional<provenance> parse_provenance(std::string_view s) {
  if (s == "matched") return provenance::matched;
  if (s == "interpolated") return provenance::interpolated;
  if (s == "extrapolated_backward") return provenance::extrapolated_backward;
  if (s == "extrapolated_forward") return provenance::extrapolated_forward;
  return std::nullopt;
}

observed_times to_observed_times(reduced_matches const& matches,
                                 service_day const& day) {
  auto out = observed_times{};
  for (auto const& [seq, m] : matches.by_sequence_) {
    out.emplace(seq, to_service_time(m.observed_at_, day));
  }
  return out;
}

namespace {

std::int64_t floor_div(std::int64_t const a, std::int64_t const b) {
  auto q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) {
    --q;
  }
  return q;
}

// r_p + (t_n - t_p) / (t_q - t_p) * (r_q - r_p), rounded half up.
service_time interpolate(service_time const t_n, service_time const t_p,
                         service_time const t_q, service_time const r_p,
                         service_time const r_q) {
  auto const den = static_cast<std::int64_t>(t_q - t_p);
  if (den == 0) {
    return r_p;
  }
  auto const num =
      static_cast<std::int64_t>(t_n - t_p) * static_cast<std::int64_t>(r_q - r_p);
  auto const offset = floor_div(2 * num + den, 2 * den);
  return r_p + static_cast<std::int32_t>(offset);
}

}  // namespace

std::optional<corrected_trip> infer_stop_times(scheduled_trip const& trip,
                                               observed_times const& observed,
                                               std::size_t const min_matches,
                                               date const service_date) {
  auto const& st = trip.stop_times_;
  auto const n = st.size();

  // Observed time per stop position; sequences not on the trip are ignored.
  auto r = std::vector<std::optional<service_time>>(n);
  auto match_count = std::size_t{0U};
  for (auto i = 0U; i != n; ++i) {
    if (auto const it = observed.find(st[i].stop_sequence_);
        it != end(observed)) {
      r[i] = it->second;
      ++match_count;
    }
  }
  if (match_count == 0U && min_matches == 0U) {
    throw contract_violation{"trip " + trip.trip_id_ +
                             " has no observations and min_matches is 0"};
  }
  if (match_count < min_matches || match_count == 0U) {
    return std::nullopt;
  }

  auto out = corrected_trip{};
  out.trip_id_ = trip.trip_id_;
  out.route_id_ = trip.route_id_;
  out.headsign_ = trip.headsign_;
  out.direction_id_ = trip.direction_id_;
  out.service_date_ = service_date;
  out.match_count_ = match_count;
  out.stop_times_.reserve(n);

  // prev_matched[i]: nearest matched index <= i; next_matched[i]: >= i.
  auto prev_matched = std::vector<std::optional<std::size_t>>(n);
  auto next_matched = std::vector<std::optional<std::size_t>>(n);
  for (auto i = std::size_t{0U}, last = n; i != n; ++i) {
    if (r[i]) {
      last = i;
    }
    if (last != n) {
      prev_matched[i] = last;
    }
  }
  for (auto i = n, next = n; i-- != 0U;) {
    if (r[i]) {
      next = i;
    }
    if (next != n) {
      next_matched[i] = next;
    }
  }

  for (auto i = std::size_t{0U}; i != n; ++i) {
    auto const t_n = st[i].arrival_;
    auto c = corrected_stop_time{st[i].stop_id_, st[i].stop_sequence_, t_n, t_n,
                                 provenance::matched, false};
    if (r[i]) {
      c.corrected_ = *r[i];
    } else if (prev_matched[i] && next_matched[i]) {
      auto const p = *prev_matched[i];
      auto const q = *next_matched[i];
      c.corrected_ = interpolate(t_n, st[p].arrival_, st[q].arrival_, *r[p], *r[q]);
      c.provenance_ = provenance::interpolated;
    } else if (next_matched[i]) {
      auto const q = *next_matched[i];
      c.corrected_ = t_n + (*r[q] - st[q].arrival_);
      c.provenance_ = provenance::extrapolated_backward;
    } else {
      auto const p = *prev_matched[i];
      c.corrected_ = t_n + (*r[p] - st[p].arrival_);
      c.provenance_ = provenance::extrapolated_forward;
    }
    out.stop_times_.push_back(std::move(c));
  }

  for (auto i = 1U; i < n; ++i) {
    auto& cur = out.stop_times_[i];
    auto const& prev = out.stop_times_[i - 1];
    if (cur.corrected_ <= prev.corrected_) {
      cur.corrected_ = prev.corrected_ + 1;
      cur.adjusted_ = true;
      ++out.monotonicity_adjustments_;
    }
  }
  return out;
}

}  // namespace rtc
