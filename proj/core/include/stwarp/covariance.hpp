#pragma once

#include "stwarp/data.hpp"
#include "stwarp/warping.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace stwarp {

/// sigma2 * exp(-a_s |h|) * exp(-a_t |w|)
struct SeparableExpKernel {
  double sigma2 = 1.0;
  double a_s = 1.0;
  double a_t = 1.0;
};

/// sigma2 * exp(-a |h - v w|): a field advected with constant velocity v.
struct AsymmetricExpKernel {
  double sigma2 = 1.0;
  double a = 1.0;
  Vec2 velocity = Vec2::Zero();
};

using Kernel = std::variant<SeparableExpKernel, AsymmetricExpKernel>;

inline constexpr std::size_t kMaxKernelParameters = 4;

/// Parameter order used by gradients and flattening:
/// separable (sigma2, a_s, a_t), asymmetric (sigma2, a, v1, v2).
std::size_t kernel_parameter_count(const Kernel& k);
std::vector<std::string> kernel_parameter_names(const Kernel& k);
std::vector<double> kernel_parameters(const Kernel& k);
void set_kernel_parameters(Kernel& k, std::span<const double> values);
double kernel_variance(const Kernel& k);
void validate_kernel(const Kernel& k);

double kernel_eval(const Kernel& k, const Vec2& h, double w);

struct KernelGradient {
  double value = 0.0;
  std::array<double, kMaxKernelParameters> dparams{};
  Vec2 dh = Vec2::Zero();
  double dw = 0.0;
};

/// Value and partial derivatives. At zero displacement the coordinate
/// derivatives are reported as zero (the kernel has a cusp there).
KernelGradient kernel_eval_grad(const Kernel& k, const Vec2& h, double w);

struct NonstationaryCovariance {
  WarpingMap warp;
  Kernel kernel = SeparableExpKernel{};
  double tau2 = 0.0;

  void validate() const;
};

/// Image of a point under (f_s, f_t).
SpaceTimePoint warp_point(const WarpingMap& warp, const SpaceTimePoint& p);
std::vector<SpaceTimePoint> warp_points(const WarpingMap& warp, std::span<const SpaceTimePoint> pts);

/// Stationary kernel between two already-warped points.
inline double warped_cov(const Kernel& k, const SpaceTimePoint& a, const SpaceTimePoint& b) {
  return kernel_eval(k, Vec2(a.s1 - b.s1, a.s2 - b.s2), a.t - b.t);
}

/// Process covariance cov(Y(p), Y(q)); the nugget is not included.
double cov_eval(const NonstationaryCovariance& c, const SpaceTimePoint& p, const SpaceTimePoint& q);

/// Dense covariance of the points, with tau2 on the diagonal when requested.
Eigen::MatrixXd cov_matrix(const NonstationaryCovariance& c, std::span<const SpaceTimePoint> pts,
                           bool with_nugget);

/// Process cross-covariance between two point sets (never includes the nugget).
Eigen::MatrixXd cross_cov_matrix(const NonstationaryCovariance& c,
                                 std::span<const SpaceTimePoint> rows,
                                 std::span<const SpaceTimePoint> cols);

}  // namespace stwarp
