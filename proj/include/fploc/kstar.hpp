#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fploc/core.hpp"
#include "fploc/util.hpp"

namespace fploc {

/// K* with real-valued attributes.
///
/// For one attribute and one query, every training instance i is reached with transformation
/// probability p_i = exp(-|d_i| / x0) / (2 x0), a Laplace kernel on the absolute difference d_i.
/// The scale x0 is not a free parameter: it is solved per query and per attribute so that the
/// effective number of instances carrying the probability mass,
///
///     n_eff(x0) = (sum p_i)^2 / sum p_i^2,
///
/// equals 1 + (blend / 100) (N - 1), or the tie floor described at detail::effective_target when
/// that is unreachable. Blend 0 is the nearest-instance limit, blend 100 spreads the mass uniformly. The instance probability is the product over attributes, accumulated in log space.
inline constexpr double kDefaultBlend = 20.0;

/// Bisection bracket for x0.
inline constexpr double kScaleMin = 1e-6;
inline constexpr double kScaleMax = 1e6;

inline constexpr int kScaleMaxIterations = 64;
inline constexpr double kScaleRelTolerance = 1e-6;

inline double kstar_target_count(std::size_t n, double blend) {
  return 1.0 + blend / 100.0 * (static_cast<double>(n) - 1.0);
}

namespace detail {

inline void check_blend(double blend) {
  if (!(blend >= 0.0 && blend <= 100.0)) throw std::invalid_argument("kstar: blend must lie in [0, 100]");
}

/// n_eff for deltas already shifted so that their minimum is 0. The shift cancels in the ratio.
inline double effective_count_shifted(std::span<const double> shifted, double scale) {
  const double inv = 1.0 / scale;
  double s1 = 0.0, s2 = 0.0;
  for (double d : shifted) {
    double e = std::exp(-d * inv);
    s1 += e;
    s2 += e * e;
  }
  return s1 * s1 / s2;
}

struct ScaleSolution {
  double scale = 0.0;
  int iterations = 0;
};

/// n_eff can never drop below c, the number of instances tied at the smallest delta. When
/// c >= 1 + (b/100)(N-1) that target is out of reach and the reference K* floor
/// c + (b/100)(N-c) is used instead; without this a block of tied readings (for example a shared
/// missing-value sentinel) would pin x0 at the bracket floor and turn the attribute into an exact-match filter.
inline double effective_target(std::size_t ties, std::size_t n, double blend) {
  const double plain = kstar_target_count(n, blend);
  if (static_cast<double>(ties) < plain) return plain;
  return static_cast<double>(ties) + blend / 100.0 * static_cast<double>(n - ties);
}

/// Bisection on log(x0). n_eff is non-decreasing in x0; targets outside the bracket clamp to its ends.
inline ScaleSolution solve_scale(std::span<const double> shifted, double n_target) {
  double lo = std::log(kScaleMin), hi = std::log(kScaleMax);
  if (effective_count_shifted(shifted, kScaleMin) >= n_target) return {kScaleMin, 0};
  if (effective_count_shifted(shifted, kScaleMax) <= n_target) return {kScaleMax, 0};
  int it = 0;
  while (it < kScaleMaxIterations && hi - lo > kScaleRelTolerance) {
    double mid = 0.5 * (lo + hi);
    if (effective_count_shifted(shifted, std::exp(mid)) < n_target)
      lo = mid;
    else
      hi = mid;
    ++it;
  }
  return {std::exp(0.5 * (lo + hi)), it};
}

}  // namespace detail

/// n_eff of the kernel weights for the given absolute deltas.
inline double kstar_effective_count(std::span<const double> abs_deltas, double scale) {
  if (abs_deltas.empty()) throw std::invalid_argument("kstar_effective_count: no deltas");
  double mn = *std::min_element(abs_deltas.begin(), abs_deltas.end());
  std::vector<double> shifted(abs_deltas.begin(), abs_deltas.end());
  for (auto& d : shifted) d -= mn;
  return detail::effective_count_shifted(shifted, scale);
}

struct KStarScale {
  /// Solved x0; +inf for a degenerate attribute.
  double scale = 0.0;
  /// Normalized transformation probabilities (sum 1).
  std::vector<double> weights;
  /// All deltas equal: n_eff is N for every x0 and the weights are uniform.
  bool degenerate = false;
  int iterations = 0;
};

inline KStarScale kstar_scale_solve(std::span<const double> abs_deltas, double blend) {
  detail::check_blend(blend);
  if (abs_deltas.empty()) throw std::invalid_argument("kstar_scale_solve: at least one delta required");
  const std::size_t n = abs_deltas.size();
  auto [mn_it, mx_it] = std::minmax_element(abs_deltas.begin(), abs_deltas.end());
  const double mn = *mn_it, mx = *mx_it;

  KStarScale out;
  if (mx == mn) {
    out.scale = std::numeric_limits<double>::infinity();
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    out.degenerate = true;
    return out;
  }
  std::vector<double> shifted(abs_deltas.begin(), abs_deltas.end());
  std::size_t ties = 0;
  for (auto& d : shifted) ties += (d -= mn) == 0.0;
  auto sol = detail::solve_scale(shifted, detail::effective_target(ties, n, blend));
  out.scale = sol.scale;
  out.iterations = sol.iterations;
  out.weights.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += out.weights[i] = std::exp(-shifted[i] / sol.scale);
  for (auto& w : out.weights) w /= sum;
  return out;
}

/// Immutable K* regressor over a normalized training view.
class KStarModel {
 public:
  KStarModel(FeatureMatrix features, std::vector<double> targets, double blend = kDefaultBlend)
      : features_(std::move(features)), targets_(std::move(targets)), blend_(blend) {
    detail::check_blend(blend_);
    if (features_.rows() == 0) throw std::invalid_argument("kstar: empty model");
    if (targets_.size() != features_.rows()) throw std::invalid_argument("kstar: target count mismatch");
    columns_.assign(features_.cols(), std::vector<double>(features_.rows()));
    for (std::size_t r = 0; r < features_.rows(); ++r)
      for (std::size_t c = 0; c < features_.cols(); ++c) columns_[c][r] = features_(r, c);
  }

  KStarModel(const TrainingView& view, double blend = kDefaultBlend)
      : KStarModel(view.features, view.targets, blend) {}

  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dims() const noexcept { return features_.cols(); }
  double blend() const noexcept { return blend_; }
  const FeatureMatrix& features() const noexcept { return features_; }
  const std::vector<double>& targets() const noexcept { return targets_; }

  /// log P*(i) up to an additive constant shared by all instances.
  std::vector<double> log_probabilities(std::span<const double> query) const {
    if (query.size() != dims()) throw std::invalid_argument("kstar: query width mismatch");
    const std::size_t n = size();
    std::vector<double> logp(n, 0.0), delta(n);
    for (std::size_t a = 0; a < dims(); ++a) {
      const auto& col = columns_[a];
      const double q = query[a];
      double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = std::abs(q - col[i]);
        delta[i] = d;
        mn = std::min(mn, d);
        mx = std::max(mx, d);
      }
      if (mx == mn) continue;
      std::size_t ties = 0;
      for (auto& d : delta) ties += (d -= mn) == 0.0;
      const double inv = 1.0 / detail::solve_scale(delta, detail::effective_target(ties, n, blend_)).scale;
      for (std::size_t i = 0; i < n; ++i) logp[i] -= delta[i] * inv;
    }
    return logp;
  }

  /// exp(log P*(i) - max_j log P*(j)): the most probable instance gets weight 1.
  std::vector<double> relative_weights(std::span<const double> query) const {
    auto w = log_probabilities(query);
    const double top = *std::max_element(w.begin(), w.end());
    for (auto& v : w) v = std::exp(v - top);
    return w;
  }

  /// Normalized instance weights for a query (a probability vector over training instances).
  std::vector<double> instance_weights(std::span<const double> query) const {
    auto w = relative_weights(query);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= sum;
    return w;
  }

  // Dividing once at the end keeps the blend-0 limit an exact tie average.
  double predict(std::span<const double> query) const {
    auto w = relative_weights(query);
    double acc = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i] * targets_[i];
      sum += w[i];
    }
    return acc / sum;
  }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.update(features_.data());
    h.update(targets_);
    return h.digest();
  }

 private:
  FeatureMatrix features_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> targets_;
  double blend_;
};

/// K* over both coordinates. One set of instance weights serves the x and the y target, which is
/// the same as two per-axis K* models over identical features.
class KStarLocator {
 public:
  KStarLocator(FeatureMatrix features, std::vector<double> x_targets, std::vector<double> y_targets,
               double blend = kDefaultBlend)
      : x_model_(std::move(features), std::move(x_targets), blend), y_targets_(std::move(y_targets)) {
    if (y_targets_.size() != x_model_.size()) throw std::invalid_argument("kstar: target count mismatch");
  }

  std::size_t size() const noexcept { return x_model_.size(); }
  double blend() const noexcept { return x_model_.blend(); }
  const KStarModel& x_model() const noexcept { return x_model_; }
  const std::vector<double>& y_targets() const noexcept { return y_targets_; }

  GridPosition locate(std::span<const double> query) const {
    auto w = x_model_.relative_weights(query);
    GridPosition p;
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      p.x += w[i] * x_model_.targets()[i];
      p.y += w[i] * y_targets_[i];
      sum += w[i];
    }
    return {p.x / sum, p.y / sum};
  }

 private:
  KStarModel x_model_;
  std::vector<double> y_targets_;
};

}  // namespace fploc
