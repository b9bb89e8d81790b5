#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace stwarp {

/// Objective to minimize. Returns false when the point cannot be evaluated;
/// `grad` is null when only the value is needed.
using ObjectiveFn = std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd* grad)>;

enum class GradientMode { Analytic, FiniteDifference };

struct OptimizerOptions {
  std::string method = "lbfgs";  // lbfgs | bfgs
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-5;
  double function_tolerance = 1e-8;
  GradientMode gradient = GradientMode::Analytic;
  double fd_step = 1e-5;
  int lbfgs_rank = 20;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<double> trace;  // objective after every accepted iteration
  bool converged = false;
  std::string termination;
  std::size_t iterations = 0;
};

/// Quasi-Newton line-search minimization (Wolfe conditions). Returns the
/// last accepted iterate, which is also the best.
OptimizerResult minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0, const OptimizerOptions& options);

/// Central-difference gradient with step h.
Eigen::VectorXd central_difference(const ObjectiveFn& f, const Eigen::VectorXd& x, double h);

/// max_i |g_i - fd_i| / max(|g_i|, |fd_i|, 1e-6) between the supplied
/// gradient and central differences.
double gradient_discrepancy(const ObjectiveFn& f, const Eigen::VectorXd& x, double h);

}  // namespace stwarp
