#pragma once

#include "stwarp/covariance.hpp"
#include "stwarp/data.hpp"
#include "stwarp/optimizer.hpp"
#include "stwarp/reml.hpp"
#include "stwarp/vecchia.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stwarp {

/// How warp weights are set before fitting.
enum class WarpInit {
  AsGiven,   // keep the weights in the model
  Identity,  // axial w = (1, eps, ...), RBF weights 0
  Ramp,      // axial free parameters 0 (w_i = log 2), RBF weights 0
};

struct ModelSpec {
  /// Architecture and starting values, in working coordinates.
  NonstationaryCovariance model;
  /// Replace sigma2, tau2 and the decays with data-driven starting values.
  bool init_from_data = true;
  WarpInit warp_init = WarpInit::Identity;
  double identity_eps = 1e-6;
  /// Fit the kernel and nugget with the warp held at its start first, then
  /// release the warp. Skipped when every warp parameter is frozen.
  bool warm_start = true;
  /// Parameter name patterns held at their starting values.
  std::vector<std::string> frozen;
};

struct DomainBounds {
  double s1_lo = -0.5, s1_hi = 0.5;
  double s2_lo = -0.5, s2_hi = 0.5;
  double t_lo = -0.5, t_hi = 0.5;
};

struct FitConfig {
  OptimizerOptions optimizer;
  PlanOptions plan;
  /// Bounds mapped onto [-0.5, 0.5]; taken from the data when absent.
  std::optional<DomainBounds> domain;
  /// Rebuild the plan on the fitted warped domain and fit again from there.
  bool refit_on_warped = false;
};

struct FitResult {
  NonstationaryCovariance model;  // working coordinates
  CoordinateScaler scaler;
  std::vector<std::string> parameter_names;
  Eigen::VectorXd theta;  // natural parameters, layout order
  std::vector<bool> frozen;
  Eigen::VectorXd beta;
  std::vector<std::string> covariate_names;
  /// Negated log restricted likelihood after each accepted iteration of the
  /// final stage (the refit when refit_on_warped is set).
  std::vector<double> objective_trace;
  double reml_loglik = 0.0;
  bool converged = false;
  std::string termination;
  std::size_t iterations = 0;
  /// Plan settings with the time scale resolved.
  PlanOptions plan;
  std::string config_snapshot;
};

CoordinateScaler make_scaler(const Dataset& data, const std::optional<DomainBounds>& domain);
SpaceTimePoint to_working(const CoordinateScaler& s, const SpaceTimePoint& p);
SpaceTimePoint from_working(const CoordinateScaler& s, const SpaceTimePoint& p);
Dataset to_working(const CoordinateScaler& s, const Dataset& data);

/// Starting model per ModelSpec, for data already in working coordinates.
NonstationaryCovariance initial_model(const ModelSpec& spec, const Dataset& working);

/// Maximizes the log restricted likelihood over the non-frozen parameters.
/// Throws NumericalError naming the parameters when the objective is not
/// finite at the starting point.
FitResult fit(const Dataset& data, const ModelSpec& spec, const FitConfig& config);

/// Objective in free coordinates of the active (non-frozen) parameters:
/// negated REML and its gradient.
ObjectiveFn reml_objective(const RemlObjective& reml, const NonstationaryCovariance& base,
                           const std::vector<bool>& frozen);

/// Max relative discrepancy between the analytic REML gradient and central
/// differences in free coordinates at c.
double gradient_check(const NonstationaryCovariance& c, const Dataset& data, const VecchiaPlan& plan,
                      double h);

}  // namespace stwarp
