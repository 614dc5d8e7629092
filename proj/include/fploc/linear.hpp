#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fploc/core.hpp"

namespace fploc {

inline constexpr double kRidgeFallback = 1e-8;

struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  /// Set when the design matrix was rank deficient and the ridge fallback was used.
  bool ridge = false;

  double predict(std::span<const double> x) const {
    if (x.size() != coefficients.size()) throw std::invalid_argument("linear: query width mismatch");
    double f = intercept;
    for (std::size_t c = 0; c < x.size(); ++c) f += coefficients[c] * x[c];
    return f;
  }

  bool operator==(const LinearModel&) const = default;
};

/// Ordinary least squares with intercept. Rank-deficient designs fall back to ridge regression
/// (lambda 1e-8, intercept unpenalized) and are flagged.
inline LinearModel linreg_train(const FeatureMatrix& x, std::span<const double> y) {
  if (x.rows() == 0) throw std::invalid_argument("linreg: empty training set");
  if (y.size() != x.rows()) throw std::invalid_argument("linreg: target count mismatch");
  using Eigen::Index;
  const Index n = static_cast<Index>(x.rows()), d = static_cast<Index>(x.cols());
  Eigen::MatrixXd a(n, d + 1);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) a(i, c) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
    a(i, d) = 1.0;
    b(i) = y[static_cast<std::size_t>(i)];
  }

  LinearModel m;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::VectorXd sol;
  if (qr.rank() == d + 1) {
    sol = qr.solve(b);
  } else {
    m.ridge = true;
    Eigen::MatrixXd ata = a.transpose() * a;
    for (Index c = 0; c < d; ++c) ata(c, c) += kRidgeFallback;
    sol = ata.ldlt().solve(a.transpose() * b);
  }
  m.coefficients.resize(static_cast<std::size_t>(d));
  for (Index c = 0; c < d; ++c) m.coefficients[static_cast<std::size_t>(c)] = sol(c);
  m.intercept = sol(d);
  return m;
}

/// Predicts the training-target mean everywhere.
struct ZeroRModel {
  double constant = 0.0;

  double predict(std::span<const double> = {}) const noexcept { return constant; }
  bool operator==(const ZeroRModel&) const = default;
};

inline ZeroRModel zeror_train(std::span<const double> y) {
  if (y.empty()) throw std::invalid_argument("zeror: empty training set");
  return {std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size())};
}

/// Unweighted mean of member predictions.
template <class Query>
double vote_predict(std::span<const std::function<double(const Query&)>> members, const Query& q) {
  if (members.empty()) throw std::invalid_argument("vote: no members");
  double s = 0.0;
  for (const auto& m : members) s += m(q);
  return s / static_cast<double>(members.size());
}

inline double vote_average(std::span<const double> predictions) {
  if (predictions.empty()) throw std::invalid_argument("vote: no members");
  return std::accumulate(predictions.begin(), predictions.end(), 0.0) / static_cast<double>(predictions.size());
}

}  // namespace fploc
