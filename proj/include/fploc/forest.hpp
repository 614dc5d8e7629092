#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fploc/core.hpp"
#include "fploc/util.hpp"

namespace fploc {

enum class TreeMode { classification, regression };

inline const char* to_string(TreeMode m) { return m == TreeMode::classification ? "classification" : "regression"; }

/// One node of a decision tree. Internal nodes send x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Leaf prediction: class label (classification) or target mean (regression).
  double value = 0.0;
  /// Class counts of the leaf's training subset; empty for internal and regression nodes.
  std::vector<double> histogram;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes stored in pre-order; node 0 is the root.
struct DecisionTree {
  TreeMode mode = TreeMode::classification;
  int num_classes = 0;
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                          : nodes[i].right);
    return nodes[i];
  }

  double predict(std::span<const double> x) const { return leaf_for(x).value; }

  std::size_t depth() const { return depth_from(0); }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nodes[i].left)),
                        depth_from(static_cast<std::size_t>(nodes[i].right)));
  }
};

struct TreeOptions {
  TreeMode mode = TreeMode::classification;
  /// Features drawn per split; 0 selects ceil(sqrt(d)) for classification and ceil(d/3) for regression.
  std::size_t m = 0;
  std::size_t min_leaf = 1;
  /// Number of classes for classification; 0 infers max label + 1.
  int num_classes = 0;
};

inline std::size_t default_split_features(std::size_t d, TreeMode mode) {
  if (d == 0) return 0;
  auto m = mode == TreeMode::classification ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                            : (d + 2) / 3;
  return std::clamp<std::size_t>(m, 1, d);
}

namespace detail {

inline int infer_classes(std::span<const double> y) {
  double mx = 0.0;
  for (double v : y) {
    if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("tree: classification labels must be 0, 1, 2, ...");
    mx = std::max(mx, v);
  }
  return static_cast<int>(mx) + 1;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, const TreeOptions& opt, int classes, Rng& rng)
      : x_(x), y_(y), opt_(opt), classes_(classes), rng_(rng) {
    m_ = opt.m == 0 ? default_split_features(x.cols(), opt.mode) : std::min(opt.m, x.cols());
    features_.resize(x.cols());
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> sample) {
    DecisionTree t;
    t.mode = opt_.mode;
    t.num_classes = opt_.mode == TreeMode::classification ? classes_ : 0;
    grow(t, sample);
    return t;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
  };

  int grow(DecisionTree& t, std::span<std::size_t> sample) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    const std::size_t n = sample.size();
    const bool pure = std::all_of(sample.begin(), sample.end(), [&](std::size_t i) { return y_[i] == y_[sample[0]]; });

    Split best;
    if (!pure && n >= 2 * opt_.min_leaf) best = find_split(sample);
    if (best.feature < 0) {
      make_leaf(t.nodes[static_cast<std::size_t>(id)], sample);
      return id;
    }
    auto mid = std::stable_partition(sample.begin(), sample.end(), [&](std::size_t i) {
      return x_(i, static_cast<std::size_t>(best.feature)) <= best.threshold;
    });
    const auto n_left = static_cast<std::size_t>(mid - sample.begin());
    t.nodes[static_cast<std::size_t>(id)].feature = best.feature;
    t.nodes[static_cast<std::size_t>(id)].threshold = best.threshold;
    int l = grow(t, sample.subspan(0, n_left));
    int r = grow(t, sample.subspan(n_left));
    t.nodes[static_cast<std::size_t>(id)].left = l;
    t.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  void make_leaf(TreeNode& node, std::span<const std::size_t> sample) const {
    if (opt_.mode == TreeMode::classification) {
      node.histogram.assign(static_cast<std::size_t>(classes_), 0.0);
      for (auto i : sample) node.histogram[static_cast<std::size_t>(y_[i])] += 1.0;
      node.value = static_cast<double>(std::max_element(node.histogram.begin(), node.histogram.end()) -
                                       node.histogram.begin());
    } else {
      double s = 0.0;
      for (auto i : sample) s += y_[i];
      node.value = s / static_cast<double>(sample.size());
    }
  }

  // Impurity of a node times its size: n * gini for classification, SSE for regression.
  // Gains compare these totals, which orders splits like the usual weighted impurity decrease.
  Split find_split(std::span<const std::size_t> sample) {
    for (std::size_t i = 0; i < m_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    std::vector<std::size_t> drawn(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m_));
    std::sort(drawn.begin(), drawn.end());

    const std::size_t n = sample.size();
    const bool cls = opt_.mode == TreeMode::classification;
    std::vector<double> total(cls ? static_cast<std::size_t>(classes_) : 0, 0.0), left;
    double sum = 0.0, sumsq = 0.0;
    for (auto i : sample) {
      if (cls)
        total[static_cast<std::size_t>(y_[i])] += 1.0;
      else {
        sum += y_[i];
        sumsq += y_[i] * y_[i];
      }
    }
    auto gini_total = [](const std::vector<double>& counts, double cnt) {
      double s = 0.0;
      for (double c : counts) s += c * c;
      return cnt - s / cnt;
    };
    auto sse = [](double s, double sq, double cnt) { return sq - s * s / cnt; };
    const double parent = cls ? gini_total(total, static_cast<double>(n)) : sse(sum, sumsq, static_cast<double>(n));

    Split best;
    std::vector<std::pair<double, double>> vals(n);
    for (auto f : drawn) {
      for (std::size_t k = 0; k < n; ++k) vals[k] = {x_(sample[k], f), y_[sample[k]]};
      std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (vals.front().first == vals.back().first) continue;
      left.assign(total.size(), 0.0);
      double ls = 0.0, lsq = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        if (cls)
          left[static_cast<std::size_t>(vals[k].second)] += 1.0;
        else {
          ls += vals[k].second;
          lsq += vals[k].second * vals[k].second;
        }
        if (vals[k].first == vals[k + 1].first) continue;
        const std::size_t nl = k + 1, nr = n - nl;
        if (nl < opt_.min_leaf || nr < opt_.min_leaf) continue;
        double child;
        if (cls) {
          std::vector<double>& right = scratch_;
          right.resize(total.size());
          for (std::size_t c = 0; c < total.size(); ++c) right[c] = total[c] - left[c];
          child = gini_total(left, static_cast<double>(nl)) + gini_total(right, static_cast<double>(nr));
        } else {
          child = sse(ls, lsq, static_cast<double>(nl)) + sse(sum - ls, sumsq - lsq, static_cast<double>(nr));
        }
        const double gain = parent - child;
        if (gain > best.gain) {
          double thr = vals[k].first + 0.5 * (vals[k + 1].first - vals[k].first);
          if (!(thr < vals[k + 1].first)) thr = vals[k].first;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  TreeOptions opt_;
  int classes_;
  Rng& rng_;
  std::size_t m_ = 0;
  std::vector<std::size_t> features_;
  std::vector<double> scratch_;
};

}  // namespace detail

/// Greedy recursive tree on the rows listed in `sample` (duplicates allowed). Splits minimize Gini
/// impurity (classification) or squared error (regression) over m randomly drawn features; ties go
/// to the lowest feature index, then the lowest threshold.
inline DecisionTree tree_train(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> sample,
                               const TreeOptions& opt, Rng& rng) {
  if (sample.empty()) throw std::invalid_argument("tree_train: empty training set");
  if (y.size() != x.rows()) throw std::invalid_argument("tree_train: target count mismatch");
  if (opt.min_leaf < 1) throw std::invalid_argument("tree_train: min_leaf must be >= 1");
  int classes = 0;
  if (opt.mode == TreeMode::classification) classes = opt.num_classes > 0 ? opt.num_classes : detail::infer_classes(y);
  detail::TreeBuilder b(x, y, opt, classes, rng);
  return b.build(std::move(sample));
}

inline DecisionTree tree_train(const FeatureMatrix& x, std::span<const double> y, const TreeOptions& opt,
                               std::uint64_t seed) {
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  return tree_train(x, y, std::move(all), opt, rng);
}

// ---------------------------------------------------------------------------
// Forests

inline constexpr std::size_t kDefaultTrees = 100;

struct ForestOptions {
  std::size_t trees = kDefaultTrees;
  TreeMode mode = TreeMode::classification;
  std::size_t m = 0;
  std::size_t min_leaf = 1;
  int num_classes = 0;
  std::uint64_t seed = 1;
  bool bootstrap = true;
  unsigned jobs = 1;
};

struct Forest {
  TreeMode mode = TreeMode::classification;
  int num_classes = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;

  bool operator==(const Forest&) const = default;
};

struct ForestVote {
  int label = 0;
  /// Fraction of trees voting for each class; sums to 1.
  std::vector<double> fractions;
};

/// Bootstrap resample of size n.
inline std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> s(n);
  for (auto& i : s) i = pick(rng);
  return s;
}

inline Forest forest_train(const FeatureMatrix& x, std::span<const double> y, const ForestOptions& opt) {
  if (opt.trees < 1) throw std::invalid_argument("forest_train: need at least one tree");
  if (x.rows() == 0) throw std::invalid_argument("forest_train: empty training set");
  Forest f;
  f.mode = opt.mode;
  f.seed = opt.seed;
  f.m = opt.m == 0 ? default_split_features(x.cols(), opt.mode) : std::min(opt.m, x.cols());
  f.num_classes =
      opt.mode == TreeMode::classification ? (opt.num_classes > 0 ? opt.num_classes : detail::infer_classes(y)) : 0;
  TreeOptions topt{opt.mode, f.m, opt.min_leaf, f.num_classes};
  f.trees.resize(opt.trees);
  parallel_for(opt.trees, opt.jobs, [&](std::size_t t) {
    Rng rng(derive_seed(opt.seed, "tree", t));
    std::vector<std::size_t> sample;
    if (opt.bootstrap)
      sample = bootstrap_sample(x.rows(), rng);
    else {
      sample.resize(x.rows());
      std::iota(sample.begin(), sample.end(), 0);
    }
    f.trees[t] = tree_train(x, y, std::move(sample), topt, rng);
  });
  return f;
}

/// Majority vote; ties go to the lowest label.
inline ForestVote forest_classify(const Forest& f, std::span<const double> x) {
  if (f.mode != TreeMode::classification) throw std::logic_error("forest_classify: forest is in regression mode");
  ForestVote v;
  v.fractions.assign(static_cast<std::size_t>(f.num_classes), 0.0);
  for (const auto& t : f.trees) v.fractions[static_cast<std::size_t>(t.predict(x))] += 1.0;
  for (auto& p : v.fractions) p /= static_cast<double>(f.trees.size());
  v.label = static_cast<int>(std::max_element(v.fractions.begin(), v.fractions.end()) - v.fractions.begin());
  return v;
}

inline double forest_regress(const Forest& f, std::span<const double> x) {
  if (f.mode != TreeMode::regression) throw std::logic_error("forest_regress: forest is in classification mode");
  double s = 0.0;
  for (const auto& t : f.trees) s += t.predict(x);
  return s / static_cast<double>(f.trees.size());
}

}  // namespace fploc
