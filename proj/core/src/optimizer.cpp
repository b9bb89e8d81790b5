#include "stwarp/optimizer.hpp"

#include "stwarp/errors.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>

namespace stwarp {
namespace {

bool evaluate(const ObjectiveFn& f, const Eigen::VectorXd& x, double& v, Eigen::VectorXd* g) {
  try {
    if (!f(x, v, g)) return false;
  } catch (const NumericalError&) {
    return false;
  }
  if (!std::isfinite(v)) return false;
  return g == nullptr || g->allFinite();
}

class CeresAdapter final : public ceres::FirstOrderFunction {
 public:
  CeresAdapter(const ObjectiveFn& f, std::size_t n, const OptimizerOptions& o) : f_(f), n_(n), opt_(o) {}

  bool Evaluate(const double* params, double* cost, double* gradient) const override {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(params, static_cast<Eigen::Index>(n_));
    if (gradient == nullptr) return evaluate(f_, x, *cost, nullptr);
    Eigen::VectorXd g;
    if (opt_.gradient == GradientMode::Analytic) {
      if (!evaluate(f_, x, *cost, &g)) return false;
    } else {
      if (!evaluate(f_, x, *cost, nullptr)) return false;
      g = central_difference(f_, x, opt_.fd_step);
      if (!g.allFinite()) return false;
    }
    if (static_cast<std::size_t>(g.size()) != n_) throw Error("objective returned a gradient of wrong length");
    std::copy(g.data(), g.data() + g.size(), gradient);
    return true;
  }
  int NumParameters() const override { return static_cast<int>(n_); }

 private:
  const ObjectiveFn& f_;
  std::size_t n_;
  OptimizerOptions opt_;
};

}  // namespace

Eigen::VectorXd central_difference(const ObjectiveFn& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double fp = 0.0, fm = 0.0;
    xp[i] = x[i] + h;
    const bool okp = evaluate(f, xp, fp, nullptr);
    xp[i] = x[i] - h;
    const bool okm = evaluate(f, xp, fm, nullptr);
    xp[i] = x[i];
    g[i] = okp && okm ? (fp - fm) / (2.0 * h) : std::numeric_limits<double>::quiet_NaN();
  }
  return g;
}

double gradient_discrepancy(const ObjectiveFn& f, const Eigen::VectorXd& x, double h) {
  double v = 0.0;
  Eigen::VectorXd g;
  if (!evaluate(f, x, v, &g)) throw NumericalError("objective cannot be evaluated at the check point");
  const Eigen::VectorXd fd = central_difference(f, x, h);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double denom = std::max({std::abs(g[i]), std::abs(fd[i]), 1e-6});
    const double r = std::abs(g[i] - fd[i]) / denom;
    if (!(r <= worst)) worst = r;  // NaN propagates as the worst case
  }
  return worst;
}

OptimizerResult minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0, const OptimizerOptions& o) {
  OptimizerResult r;
  r.x = x0;
  const auto n = static_cast<std::size_t>(x0.size());
  if (n == 0) {
    if (!evaluate(f, x0, r.value, nullptr)) throw NumericalError("objective is not finite");
    r.trace = {r.value};
    r.converged = true;
    r.termination = "no free parameters";
    return r;
  }

  ceres::GradientProblemSolver::Options opts;
  if (o.method == "lbfgs")
    opts.line_search_direction_type = ceres::LBFGS;
  else if (o.method == "bfgs")
    opts.line_search_direction_type = ceres::BFGS;
  else
    throw ConfigError("unknown optimizer '" + o.method + "' (expected lbfgs or bfgs)", "optimizer");
  opts.line_search_type = ceres::WOLFE;
  opts.max_lbfgs_rank = o.lbfgs_rank;
  opts.max_num_iterations = static_cast<int>(o.max_iterations);
  opts.gradient_tolerance = o.gradient_tolerance;
  opts.function_tolerance = o.function_tolerance;
  opts.parameter_tolerance = 1e-10;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;

  ceres::GradientProblem problem(new CeresAdapter(f, n, o));
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(opts, problem, r.x.data(), &summary);

  for (const auto& it : summary.iterations) r.trace.push_back(it.cost);
  r.value = summary.final_cost;
  r.iterations = summary.iterations.empty() ? 0 : summary.iterations.size() - 1;
  r.converged = summary.termination_type == ceres::CONVERGENCE;
  r.termination = summary.message;
  if (summary.termination_type == ceres::FAILURE && summary.iterations.empty())
    throw NumericalError("optimizer failed at the initial point: " + summary.message);
  return r;
}

}  // namespace stwarp
