#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "cases.hpp"
#include "helpers.hpp"
#include "oracles/kstar_oracle.hpp"

using namespace fploc;
using namespace testing_util;

namespace {

// Frozen from the 10^6-sample grid oracle (resolution ~2.8e-5 relative in x0).
constexpr double kOracleScaleBlend50 = 1.03905;
constexpr double kOracleThreePointPrediction = 9.58117;

}  // namespace

TEST(KStarScale, AllDeltasEqualIsDegenerate) {
  std::vector<double> d{0.7, 0.7, 0.7, 0.7};
  auto s = kstar_scale_solve(d, 30);
  EXPECT_TRUE(s.degenerate);
  for (double w : s.weights) EXPECT_DOUBLE_EQ(w, 0.25);
}

TEST(KStarScale, BlendFiftyMatchesGridOracle) {
  std::vector<double> d{0, 1, 2};
  auto s = kstar_scale_solve(d, 50);
  EXPECT_FALSE(s.degenerate);
  EXPECT_NEAR(s.scale, kOracleScaleBlend50, 5e-5 * kOracleScaleBlend50);
  EXPECT_NEAR(kstar_effective_count(d, s.scale), 2.0, 1e-5);
  EXPECT_NEAR(s.scale, oracle::scale_full(d, 50), 5e-5 * s.scale);
}

TEST(KStarScale, BlendHundredIsNearlyUniform) {
  std::vector<double> d{0, 1, 2};
  auto s = kstar_scale_solve(d, 100);
  const auto [mn, mx] = std::minmax_element(s.weights.begin(), s.weights.end());
  EXPECT_LT(*mx / *mn, 1.01);
  auto ow = oracle::weights(d, oracle::scale_full(d, 100));
  EXPECT_LT(*std::max_element(ow.begin(), ow.end()) / *std::min_element(ow.begin(), ow.end()), 1.01);
}

TEST(KStarScale, RejectsBadInput) {
  std::vector<double> empty;
  EXPECT_THROW(kstar_scale_solve(empty, 20), std::invalid_argument);
  std::vector<double> d{0, 1};
  EXPECT_THROW(kstar_scale_solve(d, -1), std::invalid_argument);
  EXPECT_THROW(kstar_scale_solve(d, 101), std::invalid_argument);
}

TEST(KStarScale, WeightsFormASimplex) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 5.0), b(0.0, 100.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> d(2 + t % 15);
    for (auto& v : d) v = u(rng);
    auto s = kstar_scale_solve(d, b(rng));
    double sum = 0;
    for (double w : s.weights) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(KStarScale, EffectiveCountMonotoneInScale) {
  Rng rng(23);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> d(3 + t % 8);
    for (auto& v : d) v = u(rng);
    double prev = 0;
    for (double lx = -6; lx <= 6; lx += 0.05) {
      double n = kstar_effective_count(d, std::pow(10.0, lx));
      EXPECT_GE(n, prev - 1e-12);
      prev = n;
    }
  }
}

TEST(KStarScale, TiedMinimumRaisesTarget) {
  // Three deltas tied at the minimum cannot give n_eff below 3; the target moves to 3 + b(N-3).
  std::vector<double> d{0, 0, 0, 1, 2};
  auto s = kstar_scale_solve(d, 20);
  EXPECT_NEAR(kstar_effective_count(d, s.scale), 3.0 + 0.2 * 2.0, 1e-5);
  EXPECT_NEAR(s.scale, oracle::scale_full(d, 20), 5e-5 * s.scale);
}

TEST(KStar, SinglePointPredictsItsTarget) {
  KStarModel m(FeatureMatrix(1, 2, {0.3, -1.0}), {7.5}, 20);
  for (double q : {-3.0, 0.0, 10.0}) {
    std::vector<double> query{q, q};
    EXPECT_DOUBLE_EQ(m.predict(query), 7.5);
  }
}

TEST(KStar, EmptyModelIsRejected) {
  EXPECT_THROW(KStarModel(FeatureMatrix(0, 1), {}, 20), std::invalid_argument);
}

TEST(KStar, BlendZeroAtUniqueTrainingPoint) {
  KStarModel m(FeatureMatrix(3, 2, {0, 0, 1, 0, 0, 1}), {1, 2, 3}, 0);
  std::vector<double> q{1, 0};
  EXPECT_EQ(m.predict(q), 2.0);
}

TEST(KStar, ThreePointExampleMatchesOracle) {
  KStarModel m(FeatureMatrix(3, 1, {0, 1, 2}), {0, 10, 20}, 20);
  std::vector<double> q{0.9};
  EXPECT_NEAR(m.predict(q), kOracleThreePointPrediction, 1e-4);
  EXPECT_NEAR(m.predict(q), oracle::predict({{0}, {1}, {2}}, {0, 10, 20}, {0.9}, 20, true), 1e-4);
}

TEST(KStar, RandomSmallDatasetsMatchOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto c = random_case(1000 + seed, false);
    KStarModel m(to_matrix(c.rows), c.y, c.blend);
    EXPECT_NEAR(m.predict(c.query), oracle::predict(c.rows, c.y, c.query, c.blend), 1e-4) << "seed " << seed;
  }
}

TEST(KStar, BlendZeroIsTieAveragedNearestNeighbour) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto c = random_case(5000 + seed, true);
    KStarModel m(to_matrix(c.rows), c.y, 0.0);
    EXPECT_EQ(m.predict(c.query), oracle::tie_averaged_nn(c.rows, c.y, c.query)) << "seed " << seed;
  }
}

TEST(KStar, PredictionWithinTargetRange) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto c = random_case(9000 + seed, false);
    KStarModel m(to_matrix(c.rows), c.y, c.blend);
    double p = m.predict(c.query);
    EXPECT_GE(p, *std::min_element(c.y.begin(), c.y.end()) - 1e-9);
    EXPECT_LE(p, *std::max_element(c.y.begin(), c.y.end()) + 1e-9);
  }
}

TEST(KStar, PermutationInvariant) {
  auto c = random_case(77, false);
  while (c.rows.size() < 4) c = random_case(c.rows.size() + 78, false);
  KStarModel a(to_matrix(c.rows), c.y, c.blend);
  std::vector<std::size_t> perm(c.rows.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (auto i : perm) {
    rows.push_back(c.rows[i]);
    y.push_back(c.y[i]);
  }
  KStarModel b(to_matrix(rows), y, c.blend);
  EXPECT_NEAR(a.predict(c.query), b.predict(c.query), 1e-9);
}

TEST(KStar, FiniteWeightsOn172Attributes) {
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 3.0);
  FeatureMatrix x(60, 172);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t c = 0; c < 172; ++c) x(i, c) = g(rng);
    y[i] = static_cast<double>(i);
  }
  KStarModel m(x, y, 20);
  std::vector<double> q(172);
  for (auto& v : q) v = g(rng);
  auto w = m.instance_weights(q);
  double sum = 0;
  for (double v : w) {
    EXPECT_TRUE(std::isfinite(v));
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_TRUE(std::isfinite(m.predict(q)));
}

TEST(KStar, LocatorAgreesWithPerAxisModels) {
  auto d = generate_dataset(small_world(), Spacing(3, 3), 8);
  auto vx = preprocess(d, Axis::x, NormalizationMethod::zscore);
  auto vy = preprocess(d, Axis::y, NormalizationMethod::zscore);
  KStarModel mx(vx, 20), my(vy, 20);
  KStarLocator loc(vx.features, vx.targets, vy.targets, 20);
  for (std::size_t i = 0; i < d.size(); i += 5) {
    auto q = vx.normalization.apply(d[i].fingerprint.values);
    auto p = loc.locate(q);
    EXPECT_NEAR(p.x, mx.predict(q), 1e-9);
    EXPECT_NEAR(p.y, my.predict(q), 1e-9);
  }
}

// ---------------------------------------------------------------------------

TEST(Knn, KOneAtTrainingPoint) {
  KnnModel m(FeatureMatrix(3, 1, {0, 5, 9}), {1, 2, 3}, 1);
  std::vector<double> q{5};
  EXPECT_DOUBLE_EQ(m.predict(q), 2.0);
}

TEST(Knn, KEqualsNUniformIsTheMean) {
  KnnModel m(FeatureMatrix(4, 1, {0, 5, 9, 11}), {1, 2, 3, 10}, 4, KnnWeighting::uniform);
  std::vector<double> q{3};
  EXPECT_DOUBLE_EQ(m.predict(q), zeror_train(std::vector<double>{1, 2, 3, 10}).constant);
}

TEST(Knn, InverseDistanceHandExample) {
  // Targets {0, 10} at distances {1, 3}: (0/1 + 10/3) / (1/1 + 1/3) = 2.5.
  KnnModel m(FeatureMatrix(2, 1, {1, 3}), {0, 10}, 2, KnnWeighting::inverse_distance);
  std::vector<double> q{0};
  EXPECT_NEAR(m.predict(q), 2.5, 1e-8);
}

TEST(Knn, TiesGoToLowerIndex) {
  KnnModel m(FeatureMatrix(3, 1, {1, -1, 1}), {10, 20, 30}, 1);
  std::vector<double> q{0};
  auto nn = m.neighbors(q);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].index, 0u);
}

TEST(Knn, Preconditions) {
  EXPECT_THROW(KnnModel(FeatureMatrix(0, 1), {}, 1), std::invalid_argument);
  EXPECT_THROW(KnnModel(FeatureMatrix(2, 1, {0, 1}), {0, 1}, 3), std::invalid_argument);
  EXPECT_THROW(KnnModel(FeatureMatrix(2, 1, {0, 1}), {0, 1}, 0), std::invalid_argument);
}

TEST(Knn, PermutationInvariantWithoutTies) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  FeatureMatrix a(20, 3), b(20, 3);
  std::vector<double> ya(20), yb(20);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t c = 0; c < 3; ++c) a(i, c) = b(19 - i, c) = u(rng);
    ya[i] = yb[19 - i] = u(rng) * 10;
  }
  KnnModel ma(a, ya, 5), mb(b, yb, 5);
  std::vector<double> q{0.5, 0.5, 0.5};
  EXPECT_NEAR(ma.predict(q), mb.predict(q), 1e-12);
}
