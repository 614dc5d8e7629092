#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"

using namespace fploc;
using namespace testing_util;

namespace {

// Mean error increase from 0 s to 3 s latency for the fast walk below, frozen from the implementation's run.
constexpr double kLatencyIncrease = 2.78131;

Trajectory hand_trajectory() {
  // (0,0)@0 -> (10,0)@10 -> (10,5)@15 -> (4,5)@21
  return Trajectory{{{{0, 0}, 0.0}, {{10, 0}, 10.0}, {{10, 5}, 15.0}, {{4, 5}, 21.0}}, 0.6096, "hand"};
}

/// Noise-free world whose auxiliary sensors are constant too, so every grid point has one exact fingerprint.
Environment silent_world() {
  auto env = small_world(0.0);
  env.quantize_dbm = false;
  auto& s = env.sensors;
  s.light_sd = s.accel_sd = s.mag_sd = s.rot_sd = s.orient_sd_deg = 0.0;
  return env;
}

}  // namespace

TEST(Truth, Interpolation) {
  auto t = hand_trajectory();
  EXPECT_EQ(interpolate_truth(t, 0.0), (GridPosition{0, 0}));
  EXPECT_EQ(interpolate_truth(t, 10.0), (GridPosition{10, 0}));
  EXPECT_EQ(interpolate_truth(t, 21.0), (GridPosition{4, 5}));
  EXPECT_EQ(interpolate_truth(t, 4.0), (GridPosition{4, 0}));
  // Second segment, 2/5 of the way.
  EXPECT_DOUBLE_EQ(interpolate_truth(t, 12.0).x, 10.0);
  EXPECT_DOUBLE_EQ(interpolate_truth(t, 12.0).y, 2.0);
  // Third segment, half way.
  EXPECT_DOUBLE_EQ(interpolate_truth(t, 18.0).x, 7.0);
  EXPECT_DOUBLE_EQ(interpolate_truth(t, 18.0).y, 5.0);
}

TEST(Truth, OutsideSpanThrows) {
  auto t = hand_trajectory();
  EXPECT_THROW(interpolate_truth(t, -0.001), std::out_of_range);
  EXPECT_THROW(interpolate_truth(t, 21.001), std::out_of_range);
}

TEST(Truth, MillisecondContinuity) {
  std::vector<GridPosition> v{{2, 2}, {50, 2}, {50, 40}, {10, 60}};
  for (auto pace : {Pace::slow, Pace::normal, Pace::fast}) {
    auto t = generate_trajectory(v, pace, kBuildingBounds);
    auto prev = interpolate_truth(t, 0.0);
    for (double s = 0.001; s <= t.end_time(); s += 0.001) {
      auto p = interpolate_truth(t, s);
      EXPECT_LE(distance_m(prev, p), pace_mps(pace) * 0.001 + 1e-9);
      prev = p;
    }
  }
}

TEST(Replay, TruthForcedPredictionsHaveNoError) {
  std::vector<GridPosition> v{{2, 2}, {20, 2}, {20, 12}};
  auto traj = generate_trajectory(v, Pace::normal, {24, 16});
  auto log = sample_walk(small_world(), traj, 0.5, 3);
  std::size_t k = 0;
  Locator oracle = [&](const Fingerprint&) { return Prediction{traj.position_at(log.samples[k++].time), 0}; };
  auto r = replay_eval(oracle, log);
  EXPECT_EQ(r.average_error_m, 0.0);
  EXPECT_EQ(r.series.size(), log.samples.size());
  EXPECT_EQ(r.pace_label, "Normal");
}

TEST(Replay, LatencyIncreaseIsBoundedByDistanceWalked) {
  auto env = small_world(4.0);
  auto d = generate_dataset(env, Spacing(1), 21);
  auto model = train_model(d, LearnerSpec{});
  std::vector<GridPosition> v{{2, 2}, {21, 2}, {21, 13}, {2, 13}, {2, 3}};
  auto log = sample_walk(env, generate_trajectory(v, Pace::fast, env.bounds), 1.0, 4);
  auto r0 = replay_eval(*model, log, 0.0);
  auto r3 = replay_eval(*model, log, 3.0);
  const double increase = r3.average_error_m - r0.average_error_m;
  EXPECT_LE(increase, pace_mps(Pace::fast) * 3.0 + 0.05);
  EXPECT_GT(increase, 0.0);
  EXPECT_NEAR(increase, kLatencyIncrease, 1e-5);
  for (std::size_t i = 0; i < r0.series.size(); ++i) {
    EXPECT_EQ(r0.series[i].predicted, r3.series[i].predicted);
    EXPECT_LE(distance_m(r0.series[i].truth, r3.series[i].truth), pace_mps(Pace::fast) * 3.0 + 1e-9);
  }
}

TEST(Replay, LatencyPastTheEndUsesFinalVertex) {
  std::vector<GridPosition> v{{2, 2}, {6, 2}};
  auto traj = generate_trajectory(v, Pace::fast, {24, 16});
  auto log = sample_walk(small_world(), traj, 0.5, 3);
  Locator stay = [](const Fingerprint&) { return Prediction{{6, 2}, 0}; };
  auto r = replay_eval(stay, log, 1000.0);
  EXPECT_EQ(r.average_error_m, 0.0);
  EXPECT_THROW(replay_eval(stay, log, -1.0), std::invalid_argument);
  WalkLog empty = log;
  empty.samples.clear();
  EXPECT_THROW(replay_eval(stay, empty), std::invalid_argument);
}

TEST(Replay, OrderInvariant) {
  auto env = small_world(4.0);
  auto model = train_model(generate_dataset(env, Spacing(2), 5), LearnerSpec{});
  std::vector<GridPosition> v{{1, 1}, {22, 14}};
  auto log = sample_walk(env, generate_trajectory(v, Pace::slow, env.bounds), 0.7, 6);
  auto a = replay_eval(*model, log, 1.0);
  auto shuffled = log;
  std::reverse(shuffled.samples.begin(), shuffled.samples.end());
  std::rotate(shuffled.samples.begin(), shuffled.samples.begin() + 3, shuffled.samples.end());
  auto b = replay_eval(*model, shuffled, 1.0);
  EXPECT_NEAR(a.average_error_m, b.average_error_m, 1e-12);
}

TEST(Replay, MemorizingModelStaysWithinHalfTile) {
  auto env = silent_world();
  auto d = generate_dataset(env, Spacing(1), 1);
  LearnerSpec spec;
  spec.blend = 0.0;
  auto model = train_model(d, spec);
  std::vector<GridPosition> v{{3, 5}, {19, 5}, {19, 11}, {6, 11}};
  for (auto pace : {Pace::slow, Pace::normal, Pace::fast}) {
    auto log = sample_walk(env, generate_trajectory(v, pace, env.bounds), 0.5, 2);
    auto r = replay_eval(*model, log, 0.0);
    EXPECT_LE(r.average_error_m, 0.3048 + 1e-6) << to_string(pace);
    // Vertices sit on survey points and are recovered exactly.
    EXPECT_EQ(r.series.front().error_m, 0.0);
  }
}

TEST(Replay, StandingStillIsRepeatedStaticPrediction) {
  auto env = small_world(4.0);
  auto model = train_model(generate_dataset(env, Spacing(1), 13), LearnerSpec{});
  const GridPosition spot{9, 7};
  auto log = sample_walk(env, Trajectory::stationary(spot, 10.0), 1.0, 8);
  ASSERT_EQ(log.samples.size(), 11u);
  auto r = replay_eval(*model, log, 2.0);
  double sum = 0;
  for (const auto& s : log.samples) sum += distance_m(model->predict(s.fingerprint).position, spot);
  EXPECT_NEAR(r.average_error_m, sum / 11.0, 1e-12);
  for (const auto& p : r.series) EXPECT_EQ(p.truth, spot);
}

TEST(WalkFiles, SaveLoadRoundTrip) {
  auto env = small_world(4.0);
  std::vector<GridPosition> v{{1, 1}, {20, 3}, {11, 14}};
  auto log = sample_walk(env, generate_trajectory(v, Pace::normal, env.bounds), 0.9, 2, OrientationMode::changing);
  auto dir = scratch_dir("walk");
  save_walk(log, dir / "w.csv", env.bounds);
  EXPECT_TRUE(std::filesystem::exists(dir / "w.walk.json"));
  auto back = load_walk(dir / "w.csv");
  EXPECT_EQ(back, log);
  save_walk(back, dir / "again.csv", env.bounds);
  EXPECT_EQ(read_file(dir / "w.csv"), read_file(dir / "again.csv"));
  EXPECT_THROW(load_walk(dir / "missing.csv"), DataError);
}

TEST(WalkFiles, SeriesCsvLayout) {
  std::vector<GridPosition> v{{2, 2}, {6, 2}};
  auto traj = generate_trajectory(v, 0.6096, {24, 16}, "custom");
  auto log = sample_walk(small_world(), traj, 2.0, 1);
  Locator at_origin = [](const Fingerprint&) { return Prediction{{2, 2}, 0}; };
  std::ostringstream os;
  write_series_csv(replay_eval(at_origin, log), os);
  EXPECT_EQ(os.str(),
            "t,pred_x,pred_y,true_x,true_y,error_m\n"
            "0,2,2,2,2,0\n"
            "2,2,2,4,2,1.2192\n"
            "4,2,2,6,2,2.4384\n");
}

TEST(PaceTable, RowRoundTrip) {
  EXPECT_STREQ(kPaceTableHeader, "Algorithm,Pace,Orientation,Average Error (m)");
  const std::string line = "K*,Slow,Changing,5.08";
  EXPECT_EQ(format_pace_row(parse_pace_row(line)), line);
}
