#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace stwarp {

using Vec2 = Eigen::Vector2d;

enum class Axis { S1, S2, T };

/// Monotone one-dimensional unit: f(c) = w_1 c + sum_{i>=2} w_i sigmoid(slope_i (c - center_i)).
///
/// `weights` has r entries, `slopes` and `centers` have r - 1 (fixed basis).
struct AxialWarpUnit {
  Axis axis = Axis::T;
  std::vector<double> weights{1.0};
  std::vector<double> slopes;
  std::vector<double> centers;

  std::size_t basis_count() const { return weights.size(); }

  /// r basis functions with centers equally spaced over [-0.5, 0.5] and
  /// slope 4 / spacing. Weights start at (1, eps, ..., eps).
  static AxialWarpUnit with_default_basis(Axis axis, std::size_t r, double eps = 1e-6);

  void validate() const;
};

/// Raw (unnormalised) axial map sum_i w_i phi_i(c).
double axial_warp(const AxialWarpUnit& unit, double c);
double axial_warp_derivative(const AxialWarpUnit& unit, double c);

/// Identity plus radial displacements around fixed centers:
///   f(s) = s + sum_k b_k exp(-|s - c_k|^2 / (2 radius^2)) (s - c_k).
///
/// The map is the gradient of |s|^2 / 2 - radius^2 sum_k b_k g_k(s), so it is
/// injective whenever its (symmetric) Jacobian stays positive definite. With
/// |b_k| < weight_bound that holds with smallest eigenvalue >= 0.2.
struct RbfWarpUnit {
  std::vector<Vec2> centers;
  double radius = 0.5;
  std::vector<double> weights;
  double weight_bound = 0.0;

  /// n x n centers equally spaced over [-0.5, 0.5]^2, radius = radius_factor *
  /// spacing, zero weights.
  static RbfWarpUnit regular_grid(std::size_t per_side, double radius_factor = 1.5);

  /// 0.8 / sup_s sum_k ||M_k(s)|| where M_k is the Jacobian contribution of
  /// center k per unit weight.
  static double safe_weight_bound(std::span<const Vec2> centers, double radius);

  void validate() const;
};

Vec2 rbf_warp(const RbfWarpUnit& unit, const Vec2& s);
Eigen::Matrix2d rbf_jacobian(const RbfWarpUnit& unit, const Vec2& s);

using SpatialUnit = std::variant<AxialWarpUnit, RbfWarpUnit>;

/// f_s = f_L o ... o f_1 on space and a monotone axial unit on time.
///
/// With `normalize`, every axial layer is followed by the increasing affine
/// map sending its images of -0.5 and 0.5 to -0.5 and 0.5. RBF layers are
/// identity plus a bounded displacement and are left as is.
struct WarpingMap {
  std::vector<SpatialUnit> spatial_units;
  std::optional<AxialWarpUnit> temporal_unit;
  bool normalize = true;

  bool is_identity() const;
  void validate() const;

  std::size_t parameter_count() const;
  std::size_t spatial_parameter_count() const;
  /// Weights in layer order followed by the temporal weights.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);
};

Vec2 warp_space(const WarpingMap& map, const Vec2& s);
double warp_time(const WarpingMap& map, double t);

/// Reverse-mode derivative of warp_space: adds d(adjoint . f_s(s))/d(weights)
/// to `grad` (length spatial_parameter_count()).
void warp_space_vjp(const WarpingMap& map, const Vec2& s, const Vec2& adjoint,
                    std::span<double> grad);
/// Same for warp_time; `grad` has the temporal unit's weight count.
void warp_time_vjp(const WarpingMap& map, double t, double adjoint, std::span<double> grad);

struct InjectivityReport {
  double min_determinant = 0.0;
  Vec2 location = Vec2::Zero();
  bool injective() const { return min_determinant > 0.0; }
};

/// Central-difference Jacobian determinant of the spatial composition on a
/// grid_resolution^2 grid over [lo, hi]^2; reports the minimum.
InjectivityReport check_injectivity(const WarpingMap& map, int grid_resolution, double lo = -0.5,
                                    double hi = 0.5);

/// Affine rescaling of raw coordinates to the [-0.5, 0.5] working domain.
/// Space uses one scale for both axes so distances stay isotropic.
struct CoordinateScaler {
  double s1_center = 0.0;
  double s2_center = 0.0;
  double s_scale = 1.0;
  double t_center = 0.0;
  double t_scale = 1.0;

  static CoordinateScaler from_bounds(double s1_lo, double s1_hi, double s2_lo, double s2_hi,
                                      double t_lo, double t_hi);

  double forward_s1(double v) const { return (v - s1_center) / s_scale; }
  double forward_s2(double v) const { return (v - s2_center) / s_scale; }
  double forward_t(double v) const { return (v - t_center) / t_scale; }
  double inverse_s1(double v) const { return v * s_scale + s1_center; }
  double inverse_s2(double v) const { return v * s_scale + s2_center; }
  double inverse_t(double v) const { return v * t_scale + t_center; }
};

}  // namespace stwarp
