#pragma once

// Test-side oracles and generators. Nothing here calls the library's
// factorized code paths; dense references are built from cov_matrix only.

#include "stwarp/covariance.hpp"
#include "stwarp/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace stwarp::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<SpaceTimePoint> random_points(std::mt19937_64& rng, std::size_t n) {
  std::vector<SpaceTimePoint> pts(n);
  for (auto& p : pts) p = {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)};
  return pts;
}

inline AxialWarpUnit random_axial(std::mt19937_64& rng, Axis axis, std::size_t r) {
  auto u = AxialWarpUnit::with_default_basis(axis, r);
  for (auto& w : u.weights) w = uniform(rng, 0.1, 2.0);
  return u;
}

inline RbfWarpUnit random_rbf(std::mt19937_64& rng, std::size_t per_side) {
  auto u = RbfWarpUnit::regular_grid(per_side);
  for (auto& b : u.weights) b = uniform(rng, -0.95, 0.95) * u.weight_bound;
  return u;
}

/// Axial s1 unit, RBF unit and temporal unit with random weights.
inline WarpingMap random_warp(std::mt19937_64& rng) {
  WarpingMap m;
  m.spatial_units.emplace_back(random_axial(rng, Axis::S1, 4));
  m.spatial_units.emplace_back(random_rbf(rng, 3));
  m.temporal_unit = random_axial(rng, Axis::T, 4);
  return m;
}

inline Kernel random_kernel(std::mt19937_64& rng, bool asymmetric) {
  if (asymmetric) {
    AsymmetricExpKernel k;
    k.sigma2 = uniform(rng, 0.5, 2.0);
    k.a = uniform(rng, 1.0, 6.0);
    k.velocity = Vec2(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    return k;
  }
  return SeparableExpKernel{uniform(rng, 0.5, 2.0), uniform(rng, 1.0, 6.0), uniform(rng, 1.0, 6.0)};
}

inline NonstationaryCovariance random_model(std::mt19937_64& rng, bool asymmetric, bool warped) {
  NonstationaryCovariance c;
  c.kernel = random_kernel(rng, asymmetric);
  c.tau2 = uniform(rng, 0.05, 0.5);
  if (warped) c.warp = random_warp(rng);
  return c;
}

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t q) {
  auto pts = random_points(rng, n);
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (auto& v : z) v = std::normal_distribution<double>()(rng);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (q > 0) x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < x.cols(); ++j) x(i, j) = std::normal_distribution<double>()(rng);
  }
  return make_dataset(std::move(pts), std::move(z), std::move(x));
}

/// Log restricted likelihood with an explicit inverse.
inline double dense_reml(const NonstationaryCovariance& c, const Dataset& d) {
  const Eigen::MatrixXd sigma = cov_matrix(c, d.points, true);
  const auto n = static_cast<double>(d.size());
  const auto q = static_cast<double>(d.x.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const Eigen::MatrixXd qm = llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
  const double log_det_q = -2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double ll = -0.5 * (n - q) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det_q;
  Eigen::MatrixXd pi = qm;
  if (q > 0) {
    const Eigen::MatrixXd& x = d.x;
    const Eigen::MatrixXd xqx = x.transpose() * qm * x;
    ll += 0.5 * std::log((x.transpose() * x).determinant()) - 0.5 * std::log(xqx.determinant());
    pi -= qm * x * xqx.inverse() * x.transpose() * qm;
  }
  return ll - 0.5 * d.z.dot(pi * d.z);
}

inline Eigen::VectorXd dense_gls(const NonstationaryCovariance& c, const Dataset& d) {
  const Eigen::MatrixXd qm = cov_matrix(c, d.points, true).inverse();
  const Eigen::MatrixXd xqx = d.x.transpose() * qm * d.x;
  return xqx.inverse() * (d.x.transpose() * qm * d.z);
}

/// Indices of the k nearest among the first `limit` points by full sort.
inline std::vector<std::size_t> sorted_nearest(const std::vector<std::array<double, 3>>& pts,
                                               const std::array<double, 3>& q, std::size_t k,
                                               std::size_t limit) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < limit; ++i) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) d += (pts[i][a] - q[a]) * (pts[i][a] - q[a]);
    all.emplace_back(d, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace stwarp::testing
