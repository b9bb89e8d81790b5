#pragma once

#include "stwarp/covariance.hpp"
#include "stwarp/errors.hpp"
#include "stwarp/vecchia.hpp"

#include <Eigen/Dense>

#include <span>

namespace stwarp::detail {

/// Conditioning block for observation `i` given its neighbor positions:
/// K = Sigma_{N,N} with the nugget on the diagonal and kv = Sigma_{N,i}.
inline void local_covariance(const Kernel& kernel, double tau2,
                             std::span<const SpaceTimePoint> warped, std::size_t i,
                             std::span<const std::size_t> nbrs, Eigen::MatrixXd& k,
                             Eigen::VectorXd& kv) {
  const auto m = static_cast<Eigen::Index>(nbrs.size());
  k.resize(m, m);
  kv.resize(m);
  const double var = kernel_variance(kernel) + tau2;
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto& pa = warped[nbrs[static_cast<std::size_t>(a)]];
    kv[a] = warped_cov(kernel, pa, warped[i]);
    k(a, a) = var;
    for (Eigen::Index b = 0; b < a; ++b) {
      const double v = warped_cov(kernel, pa, warped[nbrs[static_cast<std::size_t>(b)]]);
      k(a, b) = v;
      k(b, a) = v;
    }
  }
}

/// Cholesky of `k`; on failure adds kConditioningJitter * scale to the
/// diagonal once and retries. Returns true when the jitter was needed.
inline bool factor_local(Eigen::LLT<Eigen::MatrixXd>& llt, Eigen::MatrixXd& k, double scale,
                         std::size_t index) {
  if (k.size() == 0) return false;
  llt.compute(k);
  if (llt.info() == Eigen::Success) return false;
  k.diagonal().array() += kConditioningJitter * (scale > 0.0 ? scale : 1.0);
  llt.compute(k);
  if (llt.info() != Eigen::Success)
    throw NumericalError("conditioning covariance is singular at ordered observation " +
                             std::to_string(index),
                         index);
  return true;
}

}  // namespace stwarp::detail
