#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace fploc;
using namespace testing_util;

namespace {

Environment one_radio(Bounds b = {40, 40}, GridPosition at = {0, 0}) {
  Environment env;
  env.bounds = b;
  env.radios.push_back({"solo", 0, at, -40.0, 1.0});
  env.shadowing_sd_db = 0.0;
  env.quantize_dbm = false;
  return env;
}

// Independent crossing check: walk the segment in small steps and look for a point strictly inside.
bool sampled_crossing(const GridPosition& a, const GridPosition& b, const Obstacle& o) {
  constexpr int kSteps = 20000;
  for (int i = 1; i < kSteps; ++i) {
    const double f = static_cast<double>(i) / kSteps;
    const double x = a.x + f * (b.x - a.x), y = a.y + f * (b.y - a.y);
    if (x > o.x0 && x < o.x1 && y > o.y0 && y < o.y1) return true;
  }
  return false;
}

}  // namespace

TEST(Rssi, ReferenceDistanceAndOneDecade) {
  auto env = one_radio();
  Rng rng(1);
  const GridPosition at_d0{1.0 / kMetersPerTile, 0.0};
  EXPECT_NEAR(*rssi_at(env, env.radios[0], at_d0, rng), -40.0, 1e-9);
  const GridPosition at_10d0{10.0 / kMetersPerTile, 0.0};
  EXPECT_NEAR(*rssi_at(env, env.radios[0], at_10d0, rng), -70.0, 1e-9);
  // Closer than d0 is clamped to P0.
  EXPECT_NEAR(mean_rssi(env, env.radios[0], {0.5, 0.0}), -40.0, 1e-12);
}

TEST(Rssi, TwoWallsCostTenDecibels) {
  auto env = one_radio({40, 20}, {1, 10});
  const GridPosition q{30, 10};
  const double free = mean_rssi(env, env.radios[0], q);
  env.obstacles.push_back({8, 5, 9, 15, 5.0, true});
  env.obstacles.push_back({20, 0, 22, 12, 5.0, true});
  env.obstacles.push_back({25, 12, 27, 20, 5.0, true});  // off the line of sight
  int crossed = 0;
  for (const auto& o : env.obstacles) crossed += sampled_crossing(env.radios[0].position, q, o);
  ASSERT_EQ(crossed, 2);
  EXPECT_NEAR(mean_rssi(env, env.radios[0], q), free - 10.0, 1e-12);
  Rng rng(3);
  EXPECT_NEAR(*rssi_at(env, env.radios[0], q, rng), free - 10.0, 1e-12);
}

TEST(Rssi, SegmentCrossingMatchesSampledOracle) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int i = 0; i < 300; ++i) {
    GridPosition a{u(rng), u(rng)}, b{u(rng), u(rng)};
    double x0 = u(rng), y0 = u(rng);
    Obstacle o{x0, y0, x0 + 1.0 + u(rng) / 5.0, y0 + 1.0 + u(rng) / 5.0, 3.0, true};
    EXPECT_EQ(segment_crosses(a, b, o), sampled_crossing(a, b, o)) << "case " << i;
  }
}

TEST(Rssi, DetectionThresholdMasksReadings) {
  auto env = one_radio({400, 10});
  Rng rng(1);
  EXPECT_FALSE(rssi_at(env, env.radios[0], {399, 0}, rng).has_value());
}

TEST(Rssi, NonIncreasingAlongRays) {
  auto env = one_radio({60, 60}, {30, 30});
  for (int k = 0; k < 16; ++k) {
    const double ang = 2.0 * std::numbers::pi * k / 16.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double r = 0.0; r < 29.0; r += 0.25) {
      const double v = mean_rssi(env, env.radios[0], {30 + r * std::cos(ang), 30 + r * std::sin(ang)});
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(Rssi, MirrorSymmetry) {
  auto env = library_environment();
  env.shadowing_sd_db = 0.0;
  auto mirror = env;
  const double w = env.bounds.width_tiles;
  for (auto& r : mirror.radios) r.position.x = w - r.position.x;
  for (auto& o : mirror.obstacles) {
    const double x0 = o.x0;
    o.x0 = w - o.x1;
    o.x1 = w - x0;
  }
  Rng rng(5);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, env.bounds.height_tiles);
  for (int i = 0; i < 200; ++i) {
    GridPosition p{ux(rng), uy(rng)}, m{w - p.x, p.y};
    for (std::size_t r = 0; r < env.radios.size(); r += 13)
      EXPECT_NEAR(mean_rssi(env, env.radios[r], p), mean_rssi(mirror, mirror.radios[r], m), 1e-9);
  }
}

TEST(Survey, OpenTenByTenHasOneHundredPoints) {
  auto env = one_radio({10, 10}, {5, 5});
  EXPECT_EQ(generate_dataset(env, Spacing(1), 1).size(), 100u);
  EXPECT_EQ(generate_dataset(env, Spacing(2, 5), 1).size(), 10u);
  EXPECT_THROW(generate_dataset(env, Spacing(0, 1), 1), std::invalid_argument);
}

TEST(Survey, LibraryFixtureSize) {
  const auto& d = library_fixture();
  EXPECT_NEAR(static_cast<double>(d.size()), 3110.0, 0.02 * 3110.0);
  EXPECT_EQ(d.size(), 3110u);
  EXPECT_EQ(d.schema().size(), 172u);
  auto env = library_environment();
  for (const auto& p : d.points()) EXPECT_TRUE(env.surveyable(p.position));
}

TEST(Survey, Deterministic) {
  auto a = generate_dataset(small_world(0.0), Spacing(2), 9);
  EXPECT_EQ(a, generate_dataset(small_world(0.0), Spacing(2), 9));
  auto b = generate_dataset(small_world(4.0), Spacing(2), 9);
  EXPECT_EQ(b, generate_dataset(small_world(4.0), Spacing(2), 9));
  EXPECT_NE(b, generate_dataset(small_world(4.0), Spacing(2), 10));
}

TEST(Survey, FingerprintsConformToSchema) {
  auto env = library_environment();
  auto d = generate_dataset(env, Spacing(7, 7), 4);
  const auto& schema = d.schema();
  for (const auto& p : d.points()) {
    ASSERT_EQ(p.fingerprint.size(), schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
      if (schema[i].kind == AttributeKind::rssi) {
        if (p.fingerprint.missing[i])
          EXPECT_EQ(p.fingerprint.values[i], kMissingRssi);
        else
          EXPECT_GE(p.fingerprint.values[i], env.detection_threshold_dbm);
      } else {
        EXPECT_FALSE(p.fingerprint.missing[i]);
      }
    }
  }
}

TEST(Survey, NoiseFreeMaskFollowsMeanPower) {
  auto env = small_world(0.0);
  env.detection_threshold_dbm = -62.0;
  auto d = generate_dataset(env, Spacing(3), 2);
  for (const auto& p : d.points())
    for (std::size_t r = 0; r < env.radios.size(); ++r) {
      const double mean = std::round(mean_rssi(env, env.radios[r], p.position));
      EXPECT_EQ(p.fingerprint.missing[r], mean < env.detection_threshold_dbm);
      if (!p.fingerprint.missing[r]) {
        EXPECT_EQ(p.fingerprint.values[r], mean);
      }
    }
}

TEST(Trajectory, TenMetersAtNormalPace) {
  std::vector<GridPosition> v{{0, 0}, {10.0 / kMetersPerTile, 0}};
  auto t = generate_trajectory(v, Pace::normal, {40, 40});
  EXPECT_NEAR(t.vertices[1].time, 8.6957, 1e-4);
  EXPECT_EQ(t.pace_label, "Normal");
}

TEST(Trajectory, Presets) {
  EXPECT_EQ(pace_mps(Pace::slow), 0.75);
  EXPECT_EQ(pace_mps(Pace::normal), 1.15);
  EXPECT_EQ(pace_mps(Pace::fast), 1.69);
  EXPECT_EQ(pace_from_string("Slow"), Pace::slow);
  EXPECT_EQ(pace_from_string("Fast"), Pace::fast);
  EXPECT_THROW(pace_from_string("sprint"), std::invalid_argument);
}

TEST(Trajectory, SegmentSpeedsEqualPace) {
  Rng rng(8);
  std::uniform_real_distribution<double> ux(0, 102), uy(0, 64), up(0.3, 2.5);
  for (int k = 0; k < 50; ++k) {
    std::vector<GridPosition> v;
    for (int i = 0; i < 6; ++i) v.push_back({ux(rng), uy(rng)});
    const double pace = up(rng);
    auto t = generate_trajectory(v, pace, kBuildingBounds);
    for (std::size_t i = 1; i < t.vertices.size(); ++i) {
      const double speed = distance_m(t.vertices[i - 1].position, t.vertices[i].position) /
                           (t.vertices[i].time - t.vertices[i - 1].time);
      EXPECT_NEAR(speed, pace, 1e-9);
    }
  }
}

TEST(Trajectory, Rejections) {
  std::vector<GridPosition> one{{1, 1}};
  EXPECT_THROW(generate_trajectory(one, 1.0, {10, 10}), std::invalid_argument);
  std::vector<GridPosition> outside{{1, 1}, {11, 1}};
  EXPECT_THROW(generate_trajectory(outside, 1.0, {10, 10}), std::invalid_argument);
  std::vector<GridPosition> ok{{1, 1}, {5, 1}};
  EXPECT_THROW(generate_trajectory(ok, 0.0, {10, 10}), std::invalid_argument);
  std::vector<GridPosition> repeated{{1, 1}, {1, 1}};
  EXPECT_THROW(generate_trajectory(repeated, 1.0, {10, 10}), std::invalid_argument);
}

TEST(Walk, IntervalLongerThanWalkGivesOneSample) {
  std::vector<GridPosition> v{{2, 2}, {6, 2}};
  auto t = generate_trajectory(v, Pace::fast, {24, 16});
  auto log = sample_walk(small_world(), t, 100.0, 1);
  ASSERT_EQ(log.samples.size(), 1u);
  EXPECT_EQ(log.samples[0].time, 0.0);
  EXPECT_THROW(sample_walk(small_world(), t, 0.0, 1), std::invalid_argument);
}

TEST(Walk, SamplesAtFixedIntervals) {
  std::vector<GridPosition> v{{2, 2}, {20, 2}, {20, 12}};
  auto t = generate_trajectory(v, Pace::slow, {24, 16});
  auto log = sample_walk(small_world(), t, 1.0, 2);
  EXPECT_EQ(log.samples.size(), static_cast<std::size_t>(std::floor(t.end_time())) + 1);
  for (std::size_t i = 0; i < log.samples.size(); ++i) {
    EXPECT_DOUBLE_EQ(log.samples[i].time, static_cast<double>(i));
    EXPECT_EQ(log.samples[i].fingerprint.size(), log.schema.size());
  }
  EXPECT_EQ(log, sample_walk(small_world(), t, 1.0, 2));
}

TEST(Walk, ChangingOrientationMovesTheCompass) {
  std::vector<GridPosition> v{{2, 2}, {20, 2}};
  auto t = generate_trajectory(v, Pace::slow, {24, 16});
  auto env = small_world();
  const auto azimuth = env.schema().index_of("orient_x");
  ASSERT_TRUE(azimuth.has_value());
  auto fixed_log = sample_walk(env, t, 1.0, 2, OrientationMode::constant);
  auto turning = sample_walk(env, t, 1.0, 2, OrientationMode::changing);
  double spread_fixed = 0, spread_turning = 0;
  for (std::size_t i = 0; i < fixed_log.samples.size(); ++i) {
    spread_fixed = std::max(spread_fixed, std::abs(fixed_log.samples[i].fingerprint.values[*azimuth] - 180.0));
    spread_turning = std::max(spread_turning, std::abs(turning.samples[i].fingerprint.values[*azimuth] - 180.0));
  }
  EXPECT_LT(spread_fixed, 20.0);
  EXPECT_GT(spread_turning, 45.0);
}

TEST(EnvironmentJson, RoundTrip) {
  auto env = library_environment();
  env.shadowing_sd_db = 2.5;
  env.quantize_dbm = false;
  auto back = environment_from_json(nlohmann::json::parse(environment_to_json(env).dump()));
  EXPECT_EQ(back, env);
  auto j = environment_to_json(env);
  j["format"] = "other";
  EXPECT_THROW(environment_from_json(j), DataError);
  auto k = environment_to_json(env);
  k["radios"] = nlohmann::json::array();
  EXPECT_THROW(environment_from_json(k), DataError);
}
