#pragma once

// Seeded problem generators shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "fploc/fploc.hpp"

namespace testing_util {

using namespace fploc;

struct RandomCase {
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  std::vector<double> query;
  double blend = 0;
};

inline RandomCase random_case(std::uint64_t seed, bool integer_features) {
  Rng rng(seed);
  std::uniform_int_distribution<int> n_pick(1, 10), d_pick(1, 3), small(0, 3);
  std::uniform_real_distribution<double> u(-2.0, 2.0), target(0.0, 100.0), blend(0.0, 100.0);
  RandomCase c;
  const int n = n_pick(rng), d = d_pick(rng);
  for (int i = 0; i < n; ++i) {
    std::vector<double> r;
    for (int a = 0; a < d; ++a) r.push_back(integer_features ? small(rng) : u(rng));
    c.rows.push_back(r);
    c.y.push_back(target(rng));
  }
  for (int a = 0; a < d; ++a) c.query.push_back(integer_features ? small(rng) : u(rng));
  c.blend = blend(rng);
  return c;
}

inline FeatureMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

inline RbfModel random_model(Rng& rng, std::size_t k, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  RbfModel m;
  m.centers = FeatureMatrix(k, d);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t c = 0; c < d; ++c) m.centers(j, c) = g(rng);
  for (std::size_t j = 0; j < k; ++j) {
    m.widths.push_back(w(rng));
    m.weights.push_back(g(rng));
  }
  m.bias = g(rng);
  return m;
}

inline void random_batch(Rng& rng, std::size_t n, std::size_t d, FeatureMatrix& x, std::vector<double>& y) {
  std::normal_distribution<double> g(0.0, 1.0);
  x = FeatureMatrix(n, d);
  y.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) x(i, c) = g(rng);
    y[i] = g(rng);
  }
}

/// Largest element-wise relative error between the analytic gradient and central differences.
inline double gradient_check(const RbfModel& m, const FeatureMatrix& x, std::span<const double> y, double h = 1e-5) {
  auto theta = detail::rbf_flatten(m);
  auto g = detail::rbf_flatten(rbf_loss_gradient(m, x, y));
  double worst = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (rbf_loss(detail::rbf_unflatten(plus, m.k(), m.dims()), x, y) -
                       rbf_loss(detail::rbf_unflatten(minus, m.k(), m.dims()), x, y)) /
                      (2 * h);
    const double scale = std::max({std::abs(g[i]), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(g[i] - fd) / scale);
  }
  return worst;
}

}  // namespace testing_util
