#include "stwarp/covariance.hpp"

#include "stwarp/errors.hpp"

#include <cmath>

namespace stwarp {

std::size_t kernel_parameter_count(const Kernel& k) {
  return std::holds_alternative<SeparableExpKernel>(k) ? 3 : 4;
}

std::vector<std::string> kernel_parameter_names(const Kernel& k) {
  if (std::holds_alternative<SeparableExpKernel>(k)) return {"sigma2", "a_s", "a_t"};
  return {"sigma2", "a", "v1", "v2"};
}

std::vector<double> kernel_parameters(const Kernel& k) {
  if (const auto* s = std::get_if<SeparableExpKernel>(&k)) return {s->sigma2, s->a_s, s->a_t};
  const auto& a = std::get<AsymmetricExpKernel>(k);
  return {a.sigma2, a.a, a.velocity.x(), a.velocity.y()};
}

void set_kernel_parameters(Kernel& k, std::span<const double> v) {
  if (v.size() != kernel_parameter_count(k)) throw Error("kernel parameter count mismatch");
  if (auto* s = std::get_if<SeparableExpKernel>(&k)) {
    *s = {v[0], v[1], v[2]};
  } else {
    auto& a = std::get<AsymmetricExpKernel>(k);
    a.sigma2 = v[0];
    a.a = v[1];
    a.velocity = Vec2(v[2], v[3]);
  }
}

double kernel_variance(const Kernel& k) {
  return std::visit([](const auto& kk) { return kk.sigma2; }, k);
}

void validate_kernel(const Kernel& k) {
  if (const auto* s = std::get_if<SeparableExpKernel>(&k)) {
    if (!(s->sigma2 >= 0.0) || !(s->a_s > 0.0) || !(s->a_t > 0.0))
      throw ConfigError("separable kernel needs sigma2 >= 0 and positive decays");
  } else {
    const auto& a = std::get<AsymmetricExpKernel>(k);
    if (!(a.sigma2 >= 0.0) || !(a.a > 0.0) || !a.velocity.allFinite())
      throw ConfigError("asymmetric kernel needs sigma2 >= 0, a > 0 and a finite velocity");
  }
}

double kernel_eval(const Kernel& k, const Vec2& h, double w) {
  if (const auto* s = std::get_if<SeparableExpKernel>(&k))
    return s->sigma2 * std::exp(-s->a_s * h.norm() - s->a_t * std::abs(w));
  const auto& a = std::get<AsymmetricExpKernel>(k);
  return a.sigma2 * std::exp(-a.a * (h - a.velocity * w).norm());
}

KernelGradient kernel_eval_grad(const Kernel& k, const Vec2& h, double w) {
  KernelGradient g;
  if (const auto* s = std::get_if<SeparableExpKernel>(&k)) {
    const double r = h.norm();
    const double aw = std::abs(w);
    const double corr = std::exp(-s->a_s * r - s->a_t * aw);
    g.value = s->sigma2 * corr;
    g.dparams = {corr, -r * g.value, -aw * g.value, 0.0};
    if (r > 0.0) g.dh = (-s->a_s * g.value / r) * h;
    if (w != 0.0) g.dw = -s->a_t * g.value * (w > 0.0 ? 1.0 : -1.0);
    return g;
  }
  const auto& a = std::get<AsymmetricExpKernel>(k);
  const Vec2 d = h - a.velocity * w;
  const double r = d.norm();
  const double corr = std::exp(-a.a * r);
  g.value = a.sigma2 * corr;
  g.dparams[0] = corr;
  g.dparams[1] = -r * g.value;
  if (r > 0.0) {
    const Vec2 unit = d / r;
    const double scale = -a.a * g.value;
    g.dh = scale * unit;
    g.dw = -scale * unit.dot(a.velocity);
    g.dparams[2] = -scale * w * unit.x();
    g.dparams[3] = -scale * w * unit.y();
  }
  return g;
}

void NonstationaryCovariance::validate() const {
  validate_kernel(kernel);
  warp.validate();
  if (!(tau2 >= 0.0)) throw ConfigError("nugget variance must be non-negative");
}

SpaceTimePoint warp_point(const WarpingMap& warp, const SpaceTimePoint& p) {
  const Vec2 s = warp_space(warp, Vec2(p.s1, p.s2));
  return {s.x(), s.y(), warp_time(warp, p.t)};
}

std::vector<SpaceTimePoint> warp_points(const WarpingMap& warp, std::span<const SpaceTimePoint> pts) {
  std::vector<SpaceTimePoint> out(pts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pts.size()); ++i)
    out[static_cast<std::size_t>(i)] = warp_point(warp, pts[static_cast<std::size_t>(i)]);
  return out;
}

double cov_eval(const NonstationaryCovariance& c, const SpaceTimePoint& p, const SpaceTimePoint& q) {
  return warped_cov(c.kernel, warp_point(c.warp, p), warp_point(c.warp, q));
}

Eigen::MatrixXd cov_matrix(const NonstationaryCovariance& c, std::span<const SpaceTimePoint> pts,
                           bool with_nugget) {
  const auto w = warp_points(c.warp, pts);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd m(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = warped_cov(c.kernel, w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  if (with_nugget) m.diagonal().array() += c.tau2;
  return m;
}

Eigen::MatrixXd cross_cov_matrix(const NonstationaryCovariance& c,
                                 std::span<const SpaceTimePoint> rows,
                                 std::span<const SpaceTimePoint> cols) {
  const auto wr = warp_points(c.warp, rows);
  const auto wc = warp_points(c.warp, cols);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = warped_cov(c.kernel, wr[static_cast<std::size_t>(i)], wc[static_cast<std::size_t>(j)]);
  return m;
}

}  // namespace stwarp
