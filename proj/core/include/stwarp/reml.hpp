#pragma once

#include "stwarp/covariance.hpp"
#include "stwarp/data.hpp"
#include "stwarp/vecchia.hpp"

#include <Eigen/Dense>

namespace stwarp {

/// Log restricted likelihood with the Vecchia precision of a fixed plan.
///
/// The data are stored in plan order. Every term is computed from whitened
/// residuals e_i = (y_i - A_i y) / sqrt(D_ii) of the stacked columns y = [Z, X]:
/// their cross-product S gives Z'QZ, X'QZ and X'QX at once.
class RemlObjective {
 public:
  /// Throws RankDeficiencyError when X lacks full column rank and DataError
  /// when the data have no response.
  RemlObjective(const Dataset& data, VecchiaPlan plan);

  const VecchiaPlan& plan() const { return plan_; }
  std::size_t size() const { return points_.size(); }
  std::size_t covariate_count() const { return static_cast<std::size_t>(y_.cols() - 1); }
  const std::vector<SpaceTimePoint>& ordered_points() const { return points_; }

  double loglik(const NonstationaryCovariance& c) const;

  /// Also returns d loglik / d natural parameters in ParameterLayout order.
  double loglik_and_gradient(const NonstationaryCovariance& c, Eigen::VectorXd& grad) const;

  /// (X'QX)^{-1} X'QZ; empty when q = 0.
  Eigen::VectorXd gls_beta(const NonstationaryCovariance& c) const;

  /// Number of conditioning factorizations that needed the jitter retry in
  /// the most recent evaluation by this thread.
  static std::size_t last_jitter_count();

 private:
  struct Pass;
  Pass whiten(const NonstationaryCovariance& c, bool keep_coefficients) const;

  VecchiaPlan plan_;
  std::vector<SpaceTimePoint> points_;
  Eigen::MatrixXd y_;
  double log_det_xtx_ = 0.0;
};

double reml_loglik(const NonstationaryCovariance& c, const Dataset& data, const VecchiaPlan& plan);
Eigen::VectorXd gls_beta(const NonstationaryCovariance& c, const Dataset& data, const VecchiaPlan& plan);

/// Full column rank check used before any factorization.
void require_full_rank(const Eigen::MatrixXd& x);

}  // namespace stwarp
