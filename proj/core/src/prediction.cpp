#include "stwarp/prediction.hpp"

#include "stwarp/errors.hpp"
#include "stwarp/kdtree.hpp"
#include "local_conditional.hpp"

#include <algorithm>
#include <cmath>

namespace stwarp {
namespace {

double trend(const Eigen::MatrixXd& x, Eigen::Index row, const Eigen::VectorXd& beta) {
  if (beta.size() == 0 || x.cols() == 0) return 0.0;
  return x.row(row).dot(beta);
}

void check_shapes(const Dataset& data, std::size_t ntargets, const Eigen::MatrixXd& tx,
                  const Eigen::VectorXd& beta) {
  if (data.z.size() != static_cast<Eigen::Index>(data.size())) throw DataError("prediction needs observed responses");
  const auto q = data.x.cols();
  if (beta.size() != q) throw DataError("trend coefficients do not match the covariate count");
  if (q > 0 && (tx.cols() != q || tx.rows() != static_cast<Eigen::Index>(ntargets)))
    throw DataError("target covariates do not match the data covariates");
}

Prediction finish(const SpaceTimePoint& p, double mean, double var, double sigma2, double tau2, bool noisy) {
  var = std::clamp(var, 0.0, sigma2);
  return {p, mean, noisy ? var + tau2 : var, {}};
}

}  // namespace

std::vector<Prediction> predict(const NonstationaryCovariance& c, const Dataset& data,
                                std::span<const SpaceTimePoint> targets, const Eigen::MatrixXd& target_x,
                                const Eigen::VectorXd& beta, const PredictOptions& o) {
  check_shapes(data, targets.size(), target_x, beta);
  if (o.m == 0) throw ConfigError("prediction needs m >= 1", "m");
  if (o.m > data.size())
    throw ConfigError("prediction neighbor count m = " + std::to_string(o.m) + " exceeds the " +
                          std::to_string(data.size()) + " observations",
                      "m");
  const auto wdata = warp_points(c.warp, data.points);
  const auto wtarg = warp_points(c.warp, targets);
  const bool warped = o.domain == NeighborDomain::Warped;
  const KdTree3 tree(scaled_coordinates(warped ? std::span<const SpaceTimePoint>(wdata) : data.points, o.time_scale));
  const auto qpts = scaled_coordinates(warped ? std::span<const SpaceTimePoint>(wtarg) : targets, o.time_scale);

  const double sigma2 = kernel_variance(c.kernel);
  const Eigen::Index q = data.x.cols();
  Eigen::VectorXd resid = data.z;
  if (q > 0) resid -= data.x * beta;

  std::vector<Prediction> out(targets.size());
  bool failed = false;
  std::size_t failed_at = 0;
#pragma omp parallel
  {
    Eigen::MatrixXd k;
    Eigen::VectorXd kv;
    Eigen::LLT<Eigen::MatrixXd> llt;
#pragma omp for schedule(dynamic, 32)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(targets.size()); ++jj) {
      const auto j = static_cast<std::size_t>(jj);
      const auto found = tree.nearest(qpts[j], o.m);
      const auto mm = static_cast<Eigen::Index>(found.size());
      k.resize(mm, mm);
      kv.resize(mm);
      Eigen::VectorXd rn(mm);
      for (Eigen::Index a = 0; a < mm; ++a) {
        const auto ia = found[static_cast<std::size_t>(a)].index;
        rn[a] = resid[static_cast<Eigen::Index>(ia)];
        kv[a] = warped_cov(c.kernel, wdata[ia], wtarg[j]);
        k(a, a) = sigma2 + c.tau2;
        for (Eigen::Index b = 0; b < a; ++b) {
          const double v = warped_cov(c.kernel, wdata[ia], wdata[found[static_cast<std::size_t>(b)].index]);
          k(a, b) = v;
          k(b, a) = v;
        }
      }
      try {
        detail::factor_local(llt, k, sigma2, j);
      } catch (const NumericalError&) {
#pragma omp critical(stwarp_predict_failure)
        if (!failed || j < failed_at) {
          failed = true;
          failed_at = j;
        }
        continue;
      }
      const Eigen::VectorXd w = llt.solve(kv);
      out[j] = finish(targets[j], trend(target_x, jj, beta) + w.dot(rn), sigma2 - kv.dot(w), sigma2, c.tau2,
                      o.noisy);
      out[j].neighbors.reserve(found.size());
      for (const auto& nb : found) out[j].neighbors.push_back(nb.index);
    }
  }
  if (failed)
    throw NumericalError("conditioning covariance is singular for target " + std::to_string(failed_at), failed_at);
  return out;
}

std::vector<Prediction> predict(const FitResult& fit, const Dataset& data, const Dataset& targets,
                                std::size_t m, NeighborDomain domain, bool noisy) {
  if (data.covariate_count() != fit.covariate_names.size())
    throw DataError("data have " + std::to_string(data.covariate_count()) + " covariates but the fit used " +
                    std::to_string(fit.covariate_names.size()));
  const Dataset wd = to_working(fit.scaler, data);
  std::vector<SpaceTimePoint> wt;
  wt.reserve(targets.size());
  for (const auto& p : targets.points) wt.push_back(to_working(fit.scaler, p));
  PredictOptions o;
  o.m = m;
  o.domain = domain;
  o.time_scale = fit.plan.time_scale;
  o.noisy = noisy;
  auto out = predict(fit.model, wd, wt, targets.x, fit.beta, o);
  for (std::size_t j = 0; j < out.size(); ++j) out[j].point = targets.points[j];
  return out;
}

std::vector<Prediction> kriging_exact(const NonstationaryCovariance& c, const Dataset& data,
                                      std::span<const SpaceTimePoint> targets, const Eigen::MatrixXd& target_x,
                                      const Eigen::VectorXd& beta, bool noisy) {
  check_shapes(data, targets.size(), target_x, beta);
  Eigen::MatrixXd sigma = cov_matrix(c, data.points, true);
  const double sigma2 = kernel_variance(c.kernel);
  Eigen::LLT<Eigen::MatrixXd> llt;
  detail::factor_local(llt, sigma, sigma2, NumericalError::kNoIndex);
  Eigen::VectorXd resid = data.z;
  if (data.x.cols() > 0) resid -= data.x * beta;
  const Eigen::VectorXd alpha = llt.solve(resid);
  const Eigen::MatrixXd kx = cross_cov_matrix(c, data.points, targets);  // n x t
  const Eigen::MatrixXd v = llt.matrixL().solve(kx);
  std::vector<Prediction> out;
  out.reserve(targets.size());
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.push_back(finish(targets[j], trend(target_x, jj, beta) + kx.col(jj).dot(alpha),
                         sigma2 - v.col(jj).squaredNorm(), sigma2, c.tau2, noisy));
    out.back().neighbors.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.back().neighbors[i] = i;
  }
  return out;
}

}  // namespace stwarp
