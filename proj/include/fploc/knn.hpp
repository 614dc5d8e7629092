#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fploc/core.hpp"

namespace fploc {

enum class KnnWeighting { uniform, inverse_distance };

inline const char* to_string(KnnWeighting w) { return w == KnnWeighting::uniform ? "uniform" : "inverse-distance"; }

inline KnnWeighting knn_weighting_from_string(std::string_view s) {
  if (s == "uniform") return KnnWeighting::uniform;
  if (s == "inverse-distance" || s == "inverse") return KnnWeighting::inverse_distance;
  throw std::invalid_argument("unknown kNN weighting '" + std::string(s) + "'");
}

inline constexpr std::size_t kDefaultK = 5;
inline constexpr double kInverseDistanceEpsilon = 1e-9;

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Weighted average of neighbor targets; inverse-distance weights are 1 / (d + 1e-9).
inline double knn_combine(std::span<const Neighbor> nn, std::span<const double> targets, KnnWeighting w) {
  double num = 0.0, den = 0.0;
  for (const auto& n : nn) {
    double wt = w == KnnWeighting::uniform ? 1.0 : 1.0 / (n.distance + kInverseDistanceEpsilon);
    num += wt * targets[n.index];
    den += wt;
  }
  return num / den;
}

/// k nearest neighbors by Euclidean distance in normalized feature space.
class KnnModel {
 public:
  KnnModel(FeatureMatrix features, std::vector<double> targets, std::size_t k = kDefaultK,
           KnnWeighting weighting = KnnWeighting::inverse_distance)
      : features_(std::move(features)), targets_(std::move(targets)), k_(k), weighting_(weighting) {
    if (features_.rows() == 0) throw std::invalid_argument("knn: empty model");
    if (targets_.size() != features_.rows()) throw std::invalid_argument("knn: target count mismatch");
    if (k_ < 1 || k_ > features_.rows()) throw std::invalid_argument("knn: k must lie in [1, N]");
  }

  KnnModel(const TrainingView& v, std::size_t k = kDefaultK, KnnWeighting weighting = KnnWeighting::inverse_distance)
      : KnnModel(v.features, v.targets, k, weighting) {}

  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t k() const noexcept { return k_; }
  KnnWeighting weighting() const noexcept { return weighting_; }
  const FeatureMatrix& features() const noexcept { return features_; }
  const std::vector<double>& targets() const noexcept { return targets_; }

  /// The k closest instances, ties broken by lower training index.
  std::vector<Neighbor> neighbors(std::span<const double> query) const {
    if (query.size() != features_.cols()) throw std::invalid_argument("knn: query width mismatch");
    std::vector<Neighbor> all(size());
    for (std::size_t i = 0; i < size(); ++i) {
      auto row = features_.row(i);
      double s = 0.0;
      for (std::size_t c = 0; c < row.size(); ++c) s += (row[c] - query[c]) * (row[c] - query[c]);
      all[i] = {i, std::sqrt(s)};
    }
    auto closer = [](const Neighbor& a, const Neighbor& b) {
      return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_), all.end(), closer);
    all.resize(k_);
    return all;
  }

  double predict(std::span<const double> query) const { return knn_combine(neighbors(query), targets_, weighting_); }

 private:
  FeatureMatrix features_;
  std::vector<double> targets_;
  std::size_t k_;
  KnnWeighting weighting_;
};

}  // namespace fploc
