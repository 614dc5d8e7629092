#include <gtest/gtest.h>

#include <random>
#include <set>

#include "helpers.hpp"

using namespace fploc;
using namespace testing_util;

namespace {

// Holdout accuracy of the T=50 two-blob forest, frozen from the implementation's run.
constexpr double kBlobHoldoutAccuracy = 0.98;

void two_blobs(std::uint64_t seed, std::size_t per_class, FeatureMatrix& x, std::vector<double>& y, double sep = 2.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  x = FeatureMatrix(2 * per_class, 2);
  y.assign(2 * per_class, 0.0);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = i < per_class ? 0 : 1;
    x(i, 0) = g(rng) + (label ? sep : -sep);
    x(i, 1) = g(rng) + (label ? sep : -sep);
    y[i] = label;
  }
}

// Independent greedy root split: Gini over all features, midpoint thresholds, lowest feature then
// lowest threshold on ties.
std::pair<int, double> hand_root_split(const FeatureMatrix& x, const std::vector<double>& y) {
  auto gini = [](double a, double b) {
    const double n = a + b;
    return n == 0 ? 0.0 : 1.0 - (a / n) * (a / n) - (b / n) * (b / n);
  };
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, double> out{-1, 0};
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::set<double> values;
    for (std::size_t i = 0; i < x.rows(); ++i) values.insert(x(i, c));
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double t = 0.5 * (v[k] + v[k + 1]);
      double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const bool left = x(i, c) <= t;
        (y[i] == 0 ? (left ? l0 : r0) : (left ? l1 : r1)) += 1;
      }
      const double score = (l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1);
      if (score < best - 1e-12) {
        best = score;
        out = {static_cast<int>(c), t};
      }
    }
  }
  return out;
}

DecisionTree leaf_tree(int label, int classes) {
  DecisionTree t;
  t.mode = TreeMode::classification;
  t.num_classes = classes;
  TreeNode n;
  n.value = label;
  n.histogram.assign(static_cast<std::size_t>(classes), 0.0);
  n.histogram[static_cast<std::size_t>(label)] = 1.0;
  t.nodes.push_back(n);
  return t;
}

Forest forest_of(std::vector<int> labels, int classes) {
  Forest f;
  f.mode = TreeMode::classification;
  f.num_classes = classes;
  for (int l : labels) f.trees.push_back(leaf_tree(l, classes));
  return f;
}

}  // namespace

TEST(Tree, SingleClassIsOneLeaf) {
  FeatureMatrix x(5, 2, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  std::vector<double> y(5, 2.0);
  auto t = tree_train(x, y, TreeOptions{TreeMode::classification, 2, 1, 3}, 1);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].is_leaf());
  EXPECT_EQ(t.predict(x.row(0)), 2.0);
}

TEST(Tree, SingleThresholdSplit) {
  FeatureMatrix x(6, 2, {0, 5, 1, 5, 2, 5, 10, 5, 11, 5, 12, 5});
  std::vector<double> y{0, 0, 0, 1, 1, 1};
  auto t = tree_train(x, y, TreeOptions{TreeMode::classification, 2, 1, 2}, 1);
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 6.0);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(t.predict(x.row(i)), y[i]);
}

TEST(Tree, TwoBlobFixtureMatchesHandTrace) {
  FeatureMatrix x;
  std::vector<double> y;
  two_blobs(3, 20, x, y, 1.0);
  auto t = tree_train(x, y, TreeOptions{TreeMode::classification, 2, 1, 2}, 3);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) correct += t.predict(x.row(i)) == y[i];
  EXPECT_EQ(correct, x.rows());
  auto [feature, threshold] = hand_root_split(x, y);
  EXPECT_EQ(t.nodes[0].feature, feature);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, threshold);
}

TEST(Tree, DuplicatedColumnsFirstIndexWins) {
  FeatureMatrix x;
  std::vector<double> y;
  two_blobs(5, 15, x, y, 1.0);
  FeatureMatrix dup(x.rows(), 4);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    dup(i, 0) = dup(i, 2) = x(i, 0);
    dup(i, 1) = dup(i, 3) = x(i, 1);
  }
  auto a = tree_train(x, y, TreeOptions{TreeMode::classification, 2, 1, 2}, 1);
  auto b = tree_train(dup, y, TreeOptions{TreeMode::classification, 4, 1, 2}, 1);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
  }
}

TEST(Tree, RegressionLeavesAreMeans) {
  FeatureMatrix x(4, 1, {0, 1, 10, 11});
  std::vector<double> y{1, 3, 10, 14};
  auto t = tree_train(x, y, TreeOptions{TreeMode::regression, 1, 2, 0}, 1);
  std::vector<double> lo{0.5}, hi{10.5};
  EXPECT_DOUBLE_EQ(t.predict(lo), 2.0);
  EXPECT_DOUBLE_EQ(t.predict(hi), 12.0);
}

TEST(Forest, SingleTreeWithoutBootstrapIsTheTree) {
  FeatureMatrix x;
  std::vector<double> y;
  two_blobs(7, 30, x, y, 0.7);
  ForestOptions opt;
  opt.trees = 1;
  opt.bootstrap = false;
  opt.m = 2;
  opt.num_classes = 2;
  auto f = forest_train(x, y, opt);
  auto t = tree_train(x, y, TreeOptions{TreeMode::classification, 2, 1, 2}, derive_seed(1, "tree", 0));
  EXPECT_EQ(f.trees[0].nodes, t.nodes);
  for (std::size_t i = 0; i < x.rows(); ++i)
    EXPECT_EQ(forest_classify(f, x.row(i)).label, static_cast<int>(t.predict(x.row(i))));
}

TEST(Forest, TwoBlobHoldout) {
  FeatureMatrix x, xt;
  std::vector<double> y, yt;
  two_blobs(11, 100, x, y, 1.5);
  two_blobs(12, 50, xt, yt, 1.5);
  ForestOptions opt;
  opt.trees = 50;
  opt.seed = 4;
  auto f = forest_train(x, y, opt);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xt.rows(); ++i) correct += forest_classify(f, xt.row(i)).label == static_cast<int>(yt[i]);
  const double acc = static_cast<double>(correct) / static_cast<double>(xt.rows());
  EXPECT_GT(acc, 0.9);
  EXPECT_DOUBLE_EQ(acc, kBlobHoldoutAccuracy);
}

TEST(Forest, SameSeedSameSerializedForest) {
  FeatureMatrix x;
  std::vector<double> y;
  two_blobs(13, 40, x, y, 0.5);
  ForestOptions opt;
  opt.trees = 10;
  opt.seed = 99;
  EXPECT_EQ(to_json(forest_train(x, y, opt)).dump(), to_json(forest_train(x, y, opt)).dump());
  opt.jobs = 3;
  EXPECT_EQ(to_json(forest_train(x, y, opt)).dump(), to_json(forest_train(x, y, {10, TreeMode::classification, 0, 1, 0, 99, true, 1})).dump());
}

TEST(Forest, Unanimity) {
  auto v = forest_classify(forest_of({1, 1, 1}, 3), std::vector<double>{0.0});
  EXPECT_EQ(v.label, 1);
  EXPECT_EQ(v.fractions[1], 1.0);
}

TEST(Forest, TieGoesToLowerLabel) {
  auto v = forest_classify(forest_of({1, 0}, 2), std::vector<double>{0.0});
  EXPECT_EQ(v.label, 0);
  EXPECT_EQ(v.fractions[0], 0.5);
  EXPECT_EQ(v.fractions[1], 0.5);
}

TEST(Forest, TwoOfThree) {
  auto v = forest_classify(forest_of({0, 0, 1}, 2), std::vector<double>{0.0});
  EXPECT_EQ(v.label, 0);
  EXPECT_DOUBLE_EQ(v.fractions[0], 2.0 / 3.0);
}

TEST(Forest, ModeMismatch) {
  auto f = forest_of({0}, 1);
  EXPECT_THROW(forest_regress(f, std::vector<double>{0.0}), std::logic_error);
  f.mode = TreeMode::regression;
  EXPECT_THROW(forest_classify(f, std::vector<double>{0.0}), std::logic_error);
}

TEST(Forest, VoteFractionsAreAProbabilityVector) {
  FeatureMatrix x;
  std::vector<double> y;
  two_blobs(21, 40, x, y, 0.3);
  ForestOptions opt;
  opt.trees = 15;
  auto f = forest_train(x, y, opt);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto v = forest_classify(f, x.row(i));
    double s = 0;
    for (double p : v.fractions) {
      EXPECT_GE(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Forest, BootstrapUniqueFraction) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto s = bootstrap_sample(1000, rng);
    EXPECT_EQ(s.size(), 1000u);
    std::set<std::size_t> u(s.begin(), s.end());
    EXPECT_NEAR(static_cast<double>(u.size()) / 1000.0, 1.0 - std::exp(-1.0), 0.05);
  }
}

TEST(Forest, RegressionWithinTargetRange) {
  Rng rng(31);
  std::uniform_real_distribution<double> u(-3, 3);
  FeatureMatrix x(80, 3);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    for (std::size_t c = 0; c < 3; ++c) x(i, c) = u(rng);
    y[i] = x(i, 0) * x(i, 1) + u(rng);
  }
  ForestOptions opt;
  opt.trees = 20;
  opt.mode = TreeMode::regression;
  auto f = forest_train(x, y, opt);
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  for (int t = 0; t < 200; ++t) {
    std::vector<double> q{u(rng) * 2, u(rng) * 2, u(rng) * 2};
    double p = forest_regress(f, q);
    EXPECT_GE(p, *mn);
    EXPECT_LE(p, *mx);
  }
}

TEST(Forest, DefaultSplitFeatureCounts) {
  EXPECT_EQ(default_split_features(172, TreeMode::classification), 14u);
  EXPECT_EQ(default_split_features(172, TreeMode::regression), 58u);
}

TEST(Forest, NeedsATree) {
  FeatureMatrix x(2, 1, {0, 1});
  std::vector<double> y{0, 1};
  ForestOptions opt;
  opt.trees = 0;
  EXPECT_THROW(forest_train(x, y, opt), std::invalid_argument);
}
