#include "stwarp/reml.hpp"

#include "local_conditional.hpp"
#include "stwarp/errors.hpp"
#include "stwarp/parameters.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace stwarp {
namespace {

thread_local std::size_t g_jitter_count = 0;

// Records the failure with the smallest index so parallel runs report the
// same observation as sequential ones.
struct FirstFailure {
  bool failed = false;
  std::size_t index = 0;
  std::string message;

  void record(std::size_t i, const std::string& what) {
#pragma omp critical(stwarp_reml_failure)
    if (!failed || i < index) {
      failed = true;
      index = i;
      message = what;
    }
  }
  void rethrow() const {
    if (failed) throw NumericalError(message, index);
  }
};

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& y, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), y.cols());
  for (std::size_t a = 0; a < idx.size(); ++a) out.row(static_cast<Eigen::Index>(a)) = y.row(static_cast<Eigen::Index>(idx[a]));
  return out;
}

}  // namespace

void require_full_rank(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return;
  if (x.rows() < x.cols())
    throw RankDeficiencyError("covariate matrix has fewer rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols())
    throw RankDeficiencyError("covariate matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(x.cols()) + " columns)");
}

struct RemlObjective::Pass {
  Eigen::VectorXd d;
  Eigen::MatrixXd e;                  // n x (1 + q)
  std::vector<Eigen::VectorXd> coef;  // A rows, kept for the gradient
  std::size_t jittered = 0;
};

RemlObjective::RemlObjective(const Dataset& data, VecchiaPlan plan) : plan_(std::move(plan)) {
  if (data.z.size() != static_cast<Eigen::Index>(data.size()))
    throw DataError("likelihood evaluation needs a response for every point");
  if (plan_.size() != data.size()) throw Error("plan does not match the dataset size");
  require_full_rank(data.x);
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index q = data.x.cols();
  points_ = apply_permutation<SpaceTimePoint>(data.points, plan_.permutation);
  y_.resize(n, 1 + q);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = static_cast<Eigen::Index>(plan_.permutation[static_cast<std::size_t>(k)]);
    y_(k, 0) = data.z[src];
    if (q > 0) y_.block(k, 1, 1, q) = data.x.row(src);
  }
  if (q > 0) {
    const Eigen::MatrixXd xtx = data.x.transpose() * data.x;
    log_det_xtx_ = 2.0 * Eigen::LLT<Eigen::MatrixXd>(xtx).matrixLLT().diagonal().array().log().sum();
  }
}

std::size_t RemlObjective::last_jitter_count() { return g_jitter_count; }

RemlObjective::Pass RemlObjective::whiten(const NonstationaryCovariance& c, bool keep) const {
  const auto n = size();
  const auto warped = warp_points(c.warp, points_);
  const double sigma2 = kernel_variance(c.kernel);
  const double kii = sigma2 + c.tau2;
  Pass p;
  p.d.resize(static_cast<Eigen::Index>(n));
  p.e.resize(static_cast<Eigen::Index>(n), y_.cols());
  if (keep) p.coef.resize(n);
  std::vector<unsigned char> jit(n, 0);
  FirstFailure fail;
#pragma omp parallel
  {
    Eigen::MatrixXd k;
    Eigen::VectorXd kv;
    Eigen::LLT<Eigen::MatrixXd> llt;
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      try {
        const auto nbrs = plan_.neighbors[i];
        Eigen::RowVectorXd u = y_.row(ii);
        double d = kii;
        if (!nbrs.empty()) {
          detail::local_covariance(c.kernel, c.tau2, warped, i, nbrs, k, kv);
          jit[i] = detail::factor_local(llt, k, sigma2, i) ? 1 : 0;
          Eigen::VectorXd coef = llt.solve(kv);
          d -= kv.dot(coef);
          for (std::size_t a = 0; a < nbrs.size(); ++a)
            u -= coef[static_cast<Eigen::Index>(a)] * y_.row(static_cast<Eigen::Index>(nbrs[a]));
          if (keep) p.coef[i] = std::move(coef);
        }
        if (!(d > 0.0) || !std::isfinite(d))
          throw NumericalError("non-positive conditional variance at ordered observation " + std::to_string(i), i);
        p.d[ii] = d;
        p.e.row(ii) = u / std::sqrt(d);
      } catch (const NumericalError& e) {
        fail.record(i, e.what());
      }
    }
  }
  fail.rethrow();
  for (auto j : jit) p.jittered += j;
  g_jitter_count = p.jittered;
  return p;
}

namespace {

struct Profile {
  double loglik = 0.0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd sxx_inv;
};

// REML terms from the whitened residual cross-product S = E'E.
Profile profile(const Eigen::MatrixXd& e, const Eigen::VectorXd& d, double log_det_xtx) {
  const Eigen::Index n = e.rows();
  const Eigen::Index q = e.cols() - 1;
  // Sequential accumulation keeps the sum order fixed.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(q + 1, q + 1);
  for (Eigen::Index i = 0; i < n; ++i) s.noalias() += e.row(i).transpose() * e.row(i);
  double sum_log_d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum_log_d += std::log(d[i]);

  Profile p;
  double quad = s(0, 0);
  double log_det_sxx = 0.0;
  if (q > 0) {
    const Eigen::MatrixXd sxx = s.bottomRightCorner(q, q);
    Eigen::LLT<Eigen::MatrixXd> llt(sxx);
    if (llt.info() != Eigen::Success) throw NumericalError("X'QX is not positive definite");
    const Eigen::VectorXd sxz = s.bottomLeftCorner(q, 1);
    p.beta = llt.solve(sxz);
    p.sxx_inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
    quad -= sxz.dot(p.beta);
    log_det_sxx = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  p.loglik = -0.5 * static_cast<double>(n - q) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det_xtx -
             0.5 * sum_log_d - 0.5 * log_det_sxx - 0.5 * quad;
  return p;
}

}  // namespace

double RemlObjective::loglik(const NonstationaryCovariance& c) const {
  const auto p = whiten(c, false);
  return profile(p.e, p.d, log_det_xtx_).loglik;
}

Eigen::VectorXd RemlObjective::gls_beta(const NonstationaryCovariance& c) const {
  if (covariate_count() == 0) return {};
  const auto p = whiten(c, false);
  return profile(p.e, p.d, log_det_xtx_).beta;
}

double RemlObjective::loglik_and_gradient(const NonstationaryCovariance& c, Eigen::VectorXd& grad) const {
  const auto n = size();
  const auto pass = whiten(c, true);
  const auto prof = profile(pass.e, pass.d, log_det_xtx_);
  const Eigen::Index q = static_cast<Eigen::Index>(covariate_count());

  // G = d loglik / dS, so d loglik / de_i = 2 G e_i.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q + 1, q + 1);
  g(0, 0) = -0.5;
  if (q > 0) {
    g.bottomLeftCorner(q, 1) = 0.5 * prof.beta;
    g.topRightCorner(1, q) = 0.5 * prof.beta.transpose();
    g.bottomRightCorner(q, q) = -0.5 * prof.beta * prof.beta.transpose() - 0.5 * prof.sxx_inv;
  }

  const auto kp = kernel_parameter_count(c.kernel);
  const auto np = kp + 1;  // kernel parameters and tau2
  const auto warped = warp_points(c.warp, points_);
  const double sigma2 = kernel_variance(c.kernel);
  const auto diag_grad = kernel_eval_grad(c.kernel, Vec2::Zero(), 0.0);

  // Per-observation outputs, reduced sequentially afterwards.
  Eigen::MatrixXd pgrad = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(np));
  const auto& off = plan_.neighbors.offsets;
  std::vector<double> coord_adj(3 * (plan_.neighbors.indices.size() + n), 0.0);
  FirstFailure fail;

#pragma omp parallel
  {
    Eigen::MatrixXd k;
    Eigen::VectorXd kv;
    Eigen::LLT<Eigen::MatrixXd> llt;
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      try {
        const auto nbrs = plan_.neighbors[i];
        const double d = pass.d[ii];
        const Eigen::VectorXd ge = 2.0 * g * pass.e.row(ii).transpose();
        const double dbar = -0.5 / d - 0.5 * ge.dot(pass.e.row(ii)) / d;
        auto* adj = coord_adj.data() + 3 * (off[i] + i);  // neighbors first, then i itself
        auto add_param = [&](double weight, const KernelGradient& kg) {
          for (std::size_t t = 0; t < kp; ++t) pgrad(ii, static_cast<Eigen::Index>(t)) += weight * kg.dparams[t];
        };
        // k_ii = sigma2 + tau2
        add_param(dbar, diag_grad);
        pgrad(ii, static_cast<Eigen::Index>(kp)) += dbar;
        if (nbrs.empty()) continue;

        const auto m = static_cast<Eigen::Index>(nbrs.size());
        const Eigen::VectorXd& coef = pass.coef[i];
        detail::local_covariance(c.kernel, c.tau2, warped, i, nbrs, k, kv);
        detail::factor_local(llt, k, sigma2, i);
        const Eigen::MatrixXd yn = rows_of(y_, nbrs);
        const Eigen::VectorXd cbar = -(yn * ge) / std::sqrt(d);
        const Eigen::VectorXd lambda = llt.solve(cbar);
        const Eigen::VectorXd kbar = -2.0 * dbar * coef + lambda;

        const auto& wi = warped[i];
        for (Eigen::Index a = 0; a < m; ++a) {
          const auto& wa = warped[nbrs[static_cast<std::size_t>(a)]];
          // k_a = C(w_a - w_i)
          const auto kg = kernel_eval_grad(c.kernel, Vec2(wa.s1 - wi.s1, wa.s2 - wi.s2), wa.t - wi.t);
          add_param(kbar[a], kg);
          adj[3 * a] += kbar[a] * kg.dh.x();
          adj[3 * a + 1] += kbar[a] * kg.dh.y();
          adj[3 * a + 2] += kbar[a] * kg.dw;
          adj[3 * m] -= kbar[a] * kg.dh.x();
          adj[3 * m + 1] -= kbar[a] * kg.dh.y();
          adj[3 * m + 2] -= kbar[a] * kg.dw;

          // Kbar = dbar c c' - lambda c'; the diagonal carries the nugget.
          const double kaa = dbar * coef[a] * coef[a] - lambda[a] * coef[a];
          add_param(kaa, diag_grad);
          pgrad(ii, static_cast<Eigen::Index>(kp)) += kaa;
          for (Eigen::Index b = 0; b < a; ++b) {
            const double w = 2.0 * dbar * coef[a] * coef[b] - lambda[a] * coef[b] - lambda[b] * coef[a];
            const auto& wb = warped[nbrs[static_cast<std::size_t>(b)]];
            const auto kab = kernel_eval_grad(c.kernel, Vec2(wa.s1 - wb.s1, wa.s2 - wb.s2), wa.t - wb.t);
            add_param(w, kab);
            adj[3 * a] += w * kab.dh.x();
            adj[3 * a + 1] += w * kab.dh.y();
            adj[3 * a + 2] += w * kab.dw;
            adj[3 * b] -= w * kab.dh.x();
            adj[3 * b + 1] -= w * kab.dh.y();
            adj[3 * b + 2] -= w * kab.dw;
          }
        }
      } catch (const NumericalError& e) {
        fail.record(i, e.what());
      }
    }
  }
  fail.rethrow();

  const ParameterLayout layout(c);
  grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < n; ++i) grad.head(static_cast<Eigen::Index>(np)) += pgrad.row(static_cast<Eigen::Index>(i)).transpose();

  const std::size_t nwarp = c.warp.parameter_count();
  if (nwarp == 0) return prof.loglik;
  // Gather warped-coordinate adjoints per point, then pull them back through the warp.
  Eigen::MatrixXd wbar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = plan_.neighbors[i];
    const double* adj = coord_adj.data() + 3 * (off[i] + i);
    for (std::size_t a = 0; a <= nbrs.size(); ++a) {
      const auto target = static_cast<Eigen::Index>(a < nbrs.size() ? nbrs[a] : i);
      for (int t = 0; t < 3; ++t) wbar(target, t) += adj[3 * a + t];
    }
  }
  const std::size_t nspatial = c.warp.spatial_parameter_count();
  std::span<double> gw(grad.data() + layout.warp_offset(), nwarp);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto& p = points_[i];
    if (nspatial > 0 && (wbar(r, 0) != 0.0 || wbar(r, 1) != 0.0))
      warp_space_vjp(c.warp, Vec2(p.s1, p.s2), Vec2(wbar(r, 0), wbar(r, 1)), gw.first(nspatial));
    if (nwarp > nspatial && wbar(r, 2) != 0.0) warp_time_vjp(c.warp, p.t, wbar(r, 2), gw.subspan(nspatial));
  }
  return prof.loglik;
}

double reml_loglik(const NonstationaryCovariance& c, const Dataset& data, const VecchiaPlan& plan) {
  return RemlObjective(data, plan).loglik(c);
}

Eigen::VectorXd gls_beta(const NonstationaryCovariance& c, const Dataset& data, const VecchiaPlan& plan) {
  if (data.covariate_count() == 0) throw ConfigError("GLS coefficients need at least one covariate");
  return RemlObjective(data, plan).gls_beta(c);
}

}  // namespace stwarp
