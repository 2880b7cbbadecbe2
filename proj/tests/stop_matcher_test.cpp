#include <cmath>
#include <random>

#include "gtest/gtest.h"

#include "rtc/stop_matcher.hpp"

using namespace rtc;
using namespace std::chrono;
using namespace std::chrono_literals;

namespace {

// Point reached travelling `m` metres on initial bearing `deg` (spherical).
geo_point offset(geo_point const& from, double const deg, double const m) {
  auto const d = m / kEarthRadiusMeters;
  auto const b = to_radians(deg);
  auto const p1 = to_radians(from.lat_);
  auto const l1 = to_radians(from.lon_);
  auto const p2 = std::asin(std::sin(p1) * std::cos(d) + std::cos(p1) * std::sin(d) * std::cos(b));
  auto const l2 = l1 + std::atan2(std::sin(b) * std::sin(d) * std::cos(p1),
                                  std::cos(d) - std::sin(p1) * std::sin(p2));
  return {p2 * 180.0 / std::numbers::pi, l2 * 180.0 / std::numbers::pi};
}

bool box_oracle(geo_point const& p, geo_point const& s, double const delta) {
  auto const phi_p = p.lat_ * std::numbers::pi / 180.0;
  return std::fabs(s.lat_ - p.lat_) < delta &&
         std::fabs((s.lon_ - p.lon_) * std::cos(phi_p)) < delta;
}

vehicle_position_record at(geo_point const& p, std::int64_t t = 1000) {
  auto r = vehicle_position_record{};
  r.vehicle_id_ = "V";
  r.position_ = p;
  r.observed_at_ = unixtime{seconds{t}};
  return r;
}

stop_match m(std::uint32_t seq, double dist, std::int64_t t) {
  return stop_match{"T", "S" + std::to_string(seq), seq, dist, unixtime{seconds{t}}};
}

}  // namespace

TEST(coarse_filter, coincident_stop_is_included) {
  auto const p = geo_point{51.5, -0.1};
  auto const stops = std::vector<trip_stop>{{"A", p, 1U}};
  EXPECT_EQ(coarse_filter(p, stops, make_matcher_config(300.0).delta_deg_).size(), 1U);
}

TEST(coarse_filter, equator_point_outside_box) {
  auto const p = geo_point{0.0, 0.0};
  auto const s = geo_point{0.0, 0.004};
  auto const stops = std::vector<trip_stop>{{"A", s, 1U}};
  EXPECT_TRUE(coarse_filter(p, stops, 0.0026948).empty());
  EXPECT_NEAR(great_circle_distance(p, s), 445.0, 1.0);
}

TEST(coarse_filter, membership_equals_formula_on_random_pairs) {
  auto rng = std::mt19937_64{2024};
  auto lat = std::uniform_real_distribution<double>{-60.0, 60.0};
  auto lon = std::uniform_real_distribution<double>{-179.0, 179.0};
  auto off = std::uniform_real_distribution<double>{-0.006, 0.006};
  auto const delta = make_matcher_config(300.0).delta_deg_;
  auto accepted = 0;
  for (auto i = 0; i != 5000; ++i) {
    auto const p = geo_point{lat(rng), lon(rng)};
    auto const s = geo_point{p.lat_ + off(rng), p.lon_ + off(rng)};
    auto const stops = std::vector<trip_stop>{{"S", s, 1U}};
    auto const in = !coarse_filter(p, stops, delta).empty();
    ASSERT_EQ(in, box_oracle(p, s, delta)) << p.lat_ << "," << p.lon_;
    accepted += in ? 1 : 0;
  }
  EXPECT_GT(accepted, 100);
  EXPECT_LT(accepted, 4900);
}

TEST(coarse_filter, every_stop_within_297_m_is_accepted) {
  auto rng = std::mt19937_64{99};
  auto lat = std::uniform_real_distribution<double>{-60.0, 60.0};
  auto bearing = std::uniform_real_distribution<double>{0.0, 360.0};
  auto dist = std::uniform_real_distribution<double>{0.0, 297.0};
  auto const delta = make_matcher_config(300.0).delta_deg_;
  for (auto i = 0; i != 5000; ++i) {
    auto const p = geo_point{lat(rng), 10.0};
    auto const s = offset(p, bearing(rng), dist(rng));
    ASSERT_LE(great_circle_distance(p, s), 297.0 + 1e-6);
    auto const stops = std::vector<trip_stop>{{"S", s, 1U}};
    ASSERT_EQ(coarse_filter(p, stops, delta).size(), 1U);
  }
}

TEST(match_observation, three_candidates_nearest_wins) {
  // Vehicle seen at 17:23:07 with stops A, B and C inside the rough box.
  auto const p = geo_point{51.5, -0.1};
  auto const stops = std::vector<trip_stop>{{"A", offset(p, 350.0, 180.0), 1U},
                                            {"B", offset(p, 90.0, 60.0), 2U},
                                            {"C", offset(p, 200.0, 140.0), 3U},
                                            {"D", offset(p, 10.0, 900.0), 4U}};
  auto const config = make_matcher_config(300.0);
  auto const candidates = coarse_filter(p, stops, config.delta_deg_);
  ASSERT_EQ(candidates.size(), 3U);
  EXPECT_EQ(candidates[0].stop_id_, "A");
  EXPECT_EQ(candidates[1].stop_id_, "B");
  EXPECT_EQ(candidates[2].stop_id_, "C");

  auto const seen = sys_days{2025y / July / 8} + 16h + 23min + 7s;  // 17:23:07 BST
  auto rec = at(p);
  rec.observed_at_ = seen;
  auto const match = match_observation(rec, "T1", stops, config);
  ASSERT_TRUE(match.has_value());
  EXPECT_EQ(match->stop_id_, "B");
  EXPECT_EQ(match->stop_sequence_, 2U);
  EXPECT_NEAR(match->matched_distance_, 60.0, 0.01);
  EXPECT_EQ(match->observed_at_, seen);
  EXPECT_EQ(match->trip_id_, "T1");
}

TEST(match_observation, vehicle_at_stop_and_empty_box) {
  auto const p = geo_point{51.5, -0.1};
  auto const stops = std::vector<trip_stop>{{"A", offset(p, 0.0, 250.0), 1U},
                                            {"B", p, 2U}};
  auto const config = make_matcher_config(300.0);
  auto const hit = match_observation(at(p), "T", stops, config);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->stop_id_, "B");
  EXPECT_EQ(hit->matched_distance_, 0.0);
  EXPECT_FALSE(match_observation(at(offset(p, 180.0, 2000.0)), "T", stops, config));
}

TEST(match_observation, equidistant_stops_go_to_lower_sequence) {
  auto const p = geo_point{0.0, 0.0};
  // Mirror images across the vehicle's meridian.
  auto const stops = std::vector<trip_stop>{{"HI", geo_point{0.0, 0.001}, 7U},
                                            {"LO", geo_point{0.0, -0.001}, 3U}};
  auto const hit = match_observation(at(p), "T", stops, make_matcher_config(300.0));
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->stop_sequence_, 3U);
}

TEST(match_observation, agrees_with_brute_force_argmin) {
  auto rng = std::mt19937_64{17};
  auto lat = std::uniform_real_distribution<double>{-60.0, 60.0};
  auto u = std::uniform_real_distribution<double>{0.0, 1.0};
  auto n_stops = std::uniform_int_distribution<int>{2, 40};
  for (auto radius : {150.0, 300.0, 500.0}) {
    auto const config = make_matcher_config(radius);
    for (auto trip = 0; trip != 1000; ++trip) {
      auto const origin = geo_point{lat(rng), u(rng) * 100.0};
      auto stops = std::vector<trip_stop>{};
      auto ids = std::vector<std::string>{};
      auto const n = n_stops(rng);
      ids.reserve(static_cast<std::size_t>(n));
      auto cursor = origin;
      for (auto k = 0; k != n; ++k) {
        cursor = offset(cursor, u(rng) * 360.0, 50.0 + u(rng) * 400.0);
        ids.push_back("S" + std::to_string(k));
        stops.push_back({ids.back(), cursor, static_cast<std::uint32_t>(k + 1)});
      }
      auto const& anchor = stops[static_cast<std::size_t>(u(rng) * n)].location_;
      auto const p = offset(anchor, u(rng) * 360.0, u(rng) * 1.5 * radius);

      // Brute force: scan every stop, exact distance, box membership by formula.
      auto best = std::optional<std::size_t>{};
      auto best_d = 0.0;
      for (auto i = std::size_t{0U}; i != stops.size(); ++i) {
        if (!box_oracle(p, stops[i].location_, config.delta_deg_)) {
          continue;
        }
        auto const d = great_circle_distance(p, stops[i].location_);
        if (!best || d < best_d - kDistanceTieEpsilon) {
          best = i;
          best_d = d;
        }
      }
      auto const got = match_observation(at(p), "T", stops, config);
      ASSERT_EQ(got.has_value(), best.has_value());
      if (best) {
        EXPECT_EQ(got->stop_sequence_, stops[*best].stop_sequence_);
        EXPECT_DOUBLE_EQ(got->matched_distance_, best_d);
      }
    }
  }
}

TEST(reduce_matches, closest_approach_survives) {
  auto const ms = std::vector<stop_match>{m(5, 120.0, 100), m(5, 15.0, 130), m(5, 80.0, 160)};
  auto const r = reduce_matches(ms);
  ASSERT_EQ(r.by_sequence_.size(), 1U);
  EXPECT_EQ(r.by_sequence_.at(5).matched_distance_, 15.0);
  EXPECT_EQ(r.by_sequence_.at(5).observed_at_, unixtime{130s});
}

TEST(reduce_matches, single_matches_pass_through) {
  auto const ms = std::vector<stop_match>{m(1, 10.0, 100), m(2, 20.0, 200), m(4, 5.0, 300)};
  auto const r = reduce_matches(ms);
  ASSERT_EQ(r.by_sequence_.size(), 3U);
  EXPECT_EQ(r.by_sequence_.at(2), ms[1]);
  EXPECT_EQ(r.monotonicity_discards_, 0U);
}

TEST(reduce_matches, equal_distance_keeps_earliest) {
  auto const ms = std::vector<stop_match>{m(5, 40.0, 130), m(5, 40.0, 100)};
  EXPECT_EQ(reduce_matches(ms).by_sequence_.at(5).observed_at_, unixtime{100s});
}

TEST(reduce_matches, out_of_order_pair_drops_the_farther_match) {
  // Stop 3 seen before stop 2: stop 2's match is farther and goes.
  auto const ms = std::vector<stop_match>{m(1, 10.0, 100), m(2, 90.0, 400), m(3, 20.0, 300),
                                          m(4, 10.0, 500)};
  auto const r = reduce_matches(ms);
  EXPECT_EQ(r.monotonicity_discards_, 1U);
  EXPECT_FALSE(r.by_sequence_.contains(2U));
  EXPECT_TRUE(r.by_sequence_.contains(3U));
}

TEST(reduce_matches, output_is_strictly_increasing_and_order_invariant) {
  auto rng = std::mt19937_64{44};
  auto seq = std::uniform_int_distribution<std::uint32_t>{1U, 20U};
  auto dist = std::uniform_int_distribution<int>{0, 300};
  auto t = std::uniform_int_distribution<std::int64_t>{0, 3000};
  for (auto trial = 0; trial != 500; ++trial) {
    auto ms = std::vector<stop_match>{};
    for (auto i = 0; i != 40; ++i) {
      ms.push_back(m(seq(rng), dist(rng), t(rng)));
    }
    auto const r = reduce_matches(ms);
    auto prev = std::optional<unixtime>{};
    for (auto const& [s, match] : r.by_sequence_) {
      if (prev) {
        EXPECT_GT(match.observed_at_, *prev);
      }
      prev = match.observed_at_;
      // Every survivor is the closest (then earliest) observation of its stop.
      for (auto const& other : ms) {
        if (other.stop_sequence_ == s) {
          EXPECT_LE(match.matched_distance_, other.matched_distance_);
        }
      }
    }
    auto shuffled = ms;
    std::shuffle(begin(shuffled), end(shuffled), rng);
    EXPECT_EQ(reduce_matches(shuffled).by_sequence_, r.by_sequence_);
  }
}

TEST(matches_csv, export_format) {
  auto const ms = std::vector<stop_match>{m(2, 60.004, 1720450000)};
  EXPECT_EQ(matches_to_csv(ms),
            "trip_id,stop_id,stop_sequence,matched_distance_m,observed_at\n"
            "T,S2,2,60.00,1720450000\n");
}
