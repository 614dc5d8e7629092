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

#include <Eigen/Dense>

#include "fploc/core.hpp"
#include "fploc/util.hpp"

namespace fploc {

/// Gaussian RBF network f(x) = b0 + sum_j w_j exp(-|x - c_j|^2 / (2 sigma_j^2)).
struct RbfModel {
  FeatureMatrix centers;
  std::vector<double> widths;
  std::vector<double> weights;
  double bias = 0.0;

  std::size_t k() const noexcept { return centers.rows(); }
  std::size_t dims() const noexcept { return centers.cols(); }

  void check() const {
    if (k() < 1) throw std::invalid_argument("rbf: at least one center required");
    if (widths.size() != k() || weights.size() != k()) throw std::invalid_argument("rbf: parameter size mismatch");
    for (double s : widths)
      if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("rbf: widths must be positive and finite");
  }

  bool operator==(const RbfModel&) const = default;
};

inline double rbf_activation(std::span<const double> x, std::span<const double> center, double width) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - center[c]) * (x[c] - center[c]);
  return std::exp(-s / (2.0 * width * width));
}

inline double rbf_predict(const RbfModel& m, std::span<const double> query) {
  if (query.size() != m.dims()) throw std::invalid_argument("rbf: query width mismatch");
  double f = m.bias;
  for (std::size_t j = 0; j < m.k(); ++j) f += m.weights[j] * rbf_activation(query, m.centers.row(j), m.widths[j]);
  return f;
}

inline double rbf_loss(const RbfModel& m, const FeatureMatrix& x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double r = rbf_predict(m, x.row(i)) - y[i];
    s += r * r;
  }
  return s / static_cast<double>(x.rows());
}

/// Gradient of the mean squared error, block by block.
struct RbfGradient {
  FeatureMatrix centers;
  std::vector<double> widths;
  std::vector<double> weights;
  double bias = 0.0;
};

inline RbfGradient rbf_loss_gradient(const RbfModel& m, const FeatureMatrix& x, std::span<const double> y) {
  if (x.rows() == 0) throw std::invalid_argument("rbf_loss_gradient: empty batch");
  if (x.cols() != m.dims() || y.size() != x.rows()) throw std::invalid_argument("rbf_loss_gradient: shape mismatch");
  const std::size_t n = x.rows(), k = m.k(), d = m.dims();
  RbfGradient g{FeatureMatrix(k, d), std::vector<double>(k, 0.0), std::vector<double>(k, 0.0), 0.0};
  std::vector<double> phi(k), sq(k);
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    double f = m.bias;
    for (std::size_t j = 0; j < k; ++j) {
      auto cj = m.centers.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (xi[c] - cj[c]) * (xi[c] - cj[c]);
      sq[j] = s;
      phi[j] = std::exp(-s / (2.0 * m.widths[j] * m.widths[j]));
      f += m.weights[j] * phi[j];
    }
    const double r = scale * (f - y[i]);
    g.bias += r;
    for (std::size_t j = 0; j < k; ++j) {
      const double sig2 = m.widths[j] * m.widths[j];
      const double common = r * m.weights[j] * phi[j];
      g.weights[j] += r * phi[j];
      g.widths[j] += common * sq[j] / (sig2 * m.widths[j]);
      auto cj = m.centers.row(j);
      auto gc = g.centers.row(j);
      const double coef = common / sig2;
      for (std::size_t c = 0; c < d; ++c) gc[c] += coef * (xi[c] - cj[c]);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Training

inline constexpr std::size_t kDefaultRbfCenters = 50;

struct RbfOptions {
  std::size_t centers = kDefaultRbfCenters;
  std::uint64_t seed = 1;
  int max_iters = 1000;
  double tol = 1e-8;
  int kmeans_iters = 100;
};

struct RbfTrainResult {
  RbfModel model;
  /// Loss at initialization followed by the loss after every accepted step.
  std::vector<double> loss_history;
  int iterations = 0;
};

namespace detail {

inline std::vector<double> rbf_flatten(const RbfModel& m) {
  std::vector<double> v(m.weights);
  v.push_back(m.bias);
  v.insert(v.end(), m.centers.data().begin(), m.centers.data().end());
  v.insert(v.end(), m.widths.begin(), m.widths.end());
  return v;
}

inline std::vector<double> rbf_flatten(const RbfGradient& g) {
  std::vector<double> v(g.weights);
  v.push_back(g.bias);
  v.insert(v.end(), g.centers.data().begin(), g.centers.data().end());
  v.insert(v.end(), g.widths.begin(), g.widths.end());
  return v;
}

inline RbfModel rbf_unflatten(std::span<const double> v, std::size_t k, std::size_t d) {
  RbfModel m;
  m.weights.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
  m.bias = v[k];
  auto c0 = v.begin() + static_cast<std::ptrdiff_t>(k + 1);
  m.centers = FeatureMatrix(k, d, std::vector<double>(c0, c0 + static_cast<std::ptrdiff_t>(k * d)));
  m.widths.assign(c0 + static_cast<std::ptrdiff_t>(k * d), v.end());
  return m;
}

/// Lloyd's k-means seeded with k distinct training rows.
inline FeatureMatrix kmeans(const FeatureMatrix& x, std::size_t k, std::uint64_t seed, int iters) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  FeatureMatrix centers = x.select_rows(idx);
  std::vector<std::size_t> assign(n, k);
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += (x(i, c) - centers(j, c)) * (x(i, c) - centers(j, c));
        if (s < best_d) {
          best_d = s;
          best = j;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    FeatureMatrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t c = 0; c < d; ++c) sums(assign[i], c) += x(i, c);
    }
    for (std::size_t j = 0; j < k; ++j)
      if (counts[j] > 0)  // empty clusters keep their previous center
        for (std::size_t c = 0; c < d; ++c) centers(j, c) = sums(j, c) / static_cast<double>(counts[j]);
  }
  return centers;
}

/// Output weights and bias by least squares on frozen centers and widths (ridge 1e-8 on the weights).
inline void rbf_fit_outputs(RbfModel& m, const FeatureMatrix& x, std::span<const double> y) {
  const std::size_t n = x.rows(), k = m.k();
  Eigen::MatrixXd a(n, k + 1);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rbf_activation(x.row(i), m.centers.row(j), m.widths[j]);
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = 1.0;
    b(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::MatrixXd ata = a.transpose() * a;
  for (std::size_t j = 0; j < k; ++j) ata(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += 1e-8;
  Eigen::VectorXd sol = ata.ldlt().solve(a.transpose() * b);
  for (std::size_t j = 0; j < k; ++j) m.weights[j] = sol(static_cast<Eigen::Index>(j));
  m.bias = sol(static_cast<Eigen::Index>(k));
}

}  // namespace detail

/// Initial network: k-means centers, every width set to the mean inter-center distance,
/// output layer fitted by least squares.
inline RbfModel rbf_initialize(const FeatureMatrix& x, std::span<const double> y, const RbfOptions& opt) {
  if (opt.centers < 1 || opt.centers > x.rows())
    throw std::invalid_argument("rbf_train: need 1 <= k <= N (k=" + std::to_string(opt.centers) +
                                ", N=" + std::to_string(x.rows()) + ")");
  RbfModel m;
  m.centers = detail::kmeans(x, opt.centers, opt.seed, opt.kmeans_iters);
  const std::size_t k = m.k();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < m.dims(); ++c) s += (m.centers(a, c) - m.centers(b, c)) * (m.centers(a, c) - m.centers(b, c));
      sum += std::sqrt(s);
      ++pairs;
    }
  double width = pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
  if (!(width > 0.0)) width = 1.0;
  m.widths.assign(k, width);
  m.weights.assign(k, 0.0);
  detail::rbf_fit_outputs(m, x, y);
  return m;
}

/// Full-batch gradient descent over all parameter blocks with Armijo backtracking.
/// Only steps that lower the loss are accepted.
inline RbfTrainResult rbf_train(const FeatureMatrix& x, std::span<const double> y, const RbfOptions& opt = {}) {
  if (y.size() != x.rows()) throw std::invalid_argument("rbf_train: target count mismatch");
  RbfTrainResult res;
  res.model = rbf_initialize(x, y, opt);
  const std::size_t k = res.model.k(), d = res.model.dims();

  auto theta = detail::rbf_flatten(res.model);
  auto loss_at = [&](std::span<const double> p) {
    auto m = detail::rbf_unflatten(p, k, d);
    for (double s : m.widths)
      if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    return rbf_loss(m, x, y);
  };
  double loss = rbf_loss(res.model, x, y);
  if (!std::isfinite(loss)) throw TrainingError("rbf_train: non-finite loss at iteration 0");
  res.loss_history.push_back(loss);

  double step = 1.0;
  std::vector<double> trial(theta.size());
  for (int it = 1; it <= opt.max_iters; ++it) {
    auto g = detail::rbf_flatten(rbf_loss_gradient(detail::rbf_unflatten(theta, k, d), x, y));
    double gg = 0.0;
    for (double v : g) gg += v * v;
    if (!std::isfinite(gg)) throw TrainingError("rbf_train: non-finite gradient at iteration " + std::to_string(it));
    if (gg == 0.0) break;

    bool accepted = false;
    double new_loss = loss;
    step *= 2.0;
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] - step * g[i];
      new_loss = loss_at(trial);
      if (std::isfinite(new_loss) && new_loss <= loss - 1e-4 * step * gg && new_loss < loss) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    theta.swap(trial);
    const double rel = (loss - new_loss) / std::max(loss, std::numeric_limits<double>::min());
    loss = new_loss;
    res.loss_history.push_back(loss);
    res.iterations = it;
    if (rel < opt.tol) break;
  }
  res.model = detail::rbf_unflatten(theta, k, d);
  return res;
}

}  // namespace fploc
