#include "stwarp/warping.hpp"

#include "stwarp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stwarp {
namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// phi_i(c) for i = 0..r-1 (phi_0 is the linear term).
double basis(const AxialWarpUnit& u, std::size_t i, double c) {
  if (i == 0) return c;
  return logistic(u.slopes[i - 1] * (c - u.centers[i - 1]));
}

double basis_derivative(const AxialWarpUnit& u, std::size_t i, double c) {
  if (i == 0) return 1.0;
  const double s = logistic(u.slopes[i - 1] * (c - u.centers[i - 1]));
  return u.slopes[i - 1] * s * (1.0 - s);
}

int coordinate_of(Axis axis) { return axis == Axis::S2 ? 1 : 0; }

// Normalised or raw axial output for one coordinate.
struct AxialEval {
  double f0 = 0.0;
  double span = 1.0;
  bool normalized = false;
};

AxialEval axial_frame(const AxialWarpUnit& u, bool normalize) {
  AxialEval e;
  if (!normalize) return e;
  e.normalized = true;
  e.f0 = axial_warp(u, -0.5);
  e.span = axial_warp(u, 0.5) - e.f0;
  return e;
}

double axial_apply(const AxialWarpUnit& u, const AxialEval& frame, double c) {
  const double f = axial_warp(u, c);
  return frame.normalized ? (f - frame.f0) / frame.span - 0.5 : f;
}

// Adds adjoint * d(output)/d(w_i) to grad and returns d(output)/dc.
double axial_vjp(const AxialWarpUnit& u, const AxialEval& frame, double c, double adjoint,
                 std::span<double> grad) {
  const std::size_t r = u.basis_count();
  if (!frame.normalized) {
    for (std::size_t i = 0; i < r; ++i) grad[i] += adjoint * basis(u, i, c);
    return axial_warp_derivative(u, c);
  }
  const double rel = axial_warp(u, c) - frame.f0;
  const double inv = 1.0 / frame.span;
  for (std::size_t i = 0; i < r; ++i) {
    const double b0 = basis(u, i, -0.5);
    const double b1 = basis(u, i, 0.5);
    grad[i] += adjoint * ((basis(u, i, c) - b0) * inv - rel * (b1 - b0) * inv * inv);
  }
  return axial_warp_derivative(u, c) * inv;
}

// Largest singular value of the per-unit-weight Jacobian contribution of one
// center, as a function of x = |s - c|^2 / radius^2.
double contribution_norm(double x) {
  return std::exp(-0.5 * x) * std::max(1.0, std::abs(1.0 - x));
}

}  // namespace

AxialWarpUnit AxialWarpUnit::with_default_basis(Axis axis, std::size_t r, double eps) {
  if (r == 0) throw ConfigError("axial unit needs r >= 1");
  AxialWarpUnit u;
  u.axis = axis;
  u.weights.assign(r, eps);
  u.weights[0] = 1.0;
  if (r >= 2) {
    const std::size_t k = r - 1;
    const double spacing = k == 1 ? 1.0 : 1.0 / static_cast<double>(k - 1);
    for (std::size_t i = 0; i < k; ++i) {
      u.centers.push_back(k == 1 ? 0.0 : -0.5 + spacing * static_cast<double>(i));
      u.slopes.push_back(4.0 / spacing);
    }
  }
  return u;
}

void AxialWarpUnit::validate() const {
  if (weights.empty()) throw ConfigError("axial unit has no weights");
  if (slopes.size() + 1 != weights.size() || centers.size() + 1 != weights.size())
    throw ConfigError("axial unit basis parameters do not match its weight count");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("axial weights must be positive");
  for (double s : slopes)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("axial sigmoid slopes must be positive");
}

double axial_warp(const AxialWarpUnit& unit, double c) {
  double f = 0.0;
  for (std::size_t i = 0; i < unit.basis_count(); ++i) f += unit.weights[i] * basis(unit, i, c);
  return f;
}

double axial_warp_derivative(const AxialWarpUnit& unit, double c) {
  double d = 0.0;
  for (std::size_t i = 0; i < unit.basis_count(); ++i)
    d += unit.weights[i] * basis_derivative(unit, i, c);
  return d;
}

RbfWarpUnit RbfWarpUnit::regular_grid(std::size_t per_side, double radius_factor) {
  if (per_side < 2) throw ConfigError("RBF unit needs at least 2 centers per side");
  if (!(radius_factor > 0.0)) throw ConfigError("RBF radius factor must be positive");
  RbfWarpUnit u;
  const double spacing = 1.0 / static_cast<double>(per_side - 1);
  for (std::size_t j = 0; j < per_side; ++j)
    for (std::size_t i = 0; i < per_side; ++i)
      u.centers.emplace_back(-0.5 + spacing * static_cast<double>(i),
                             -0.5 + spacing * static_cast<double>(j));
  u.radius = radius_factor * spacing;
  u.weights.assign(u.centers.size(), 0.0);
  u.weight_bound = safe_weight_bound(u.centers, u.radius);
  return u;
}

double RbfWarpUnit::safe_weight_bound(std::span<const Vec2> centers, double radius) {
  if (centers.empty()) return 0.0;
  Vec2 lo = centers.front();
  Vec2 hi = centers.front();
  for (const auto& c : centers) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  lo.array() -= 3.0 * radius;
  hi.array() += 3.0 * radius;
  const double step = radius / 25.0;
  const auto nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / step)) + 1;
  const auto ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / step)) + 1;
  const double inv_r2 = 1.0 / (radius * radius);
  double sup = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 s(lo.x() + step * i, lo.y() + step * j);
      double total = 0.0;
      for (const auto& c : centers) total += contribution_norm((s - c).squaredNorm() * inv_r2);
      sup = std::max(sup, total);
    }
  }
  // Grid maximum of a smooth function at step radius/25; the margin covers
  // the gap to the continuous supremum.
  return 0.8 / (1.02 * sup);
}

void RbfWarpUnit::validate() const {
  if (centers.empty()) throw ConfigError("RBF unit has no centers");
  if (weights.size() != centers.size()) throw ConfigError("RBF weight count does not match centers");
  if (!(radius > 0.0)) throw ConfigError("RBF radius must be positive");
  for (double b : weights)
    if (!std::isfinite(b)) throw ConfigError("RBF weights must be finite");
}

Vec2 rbf_warp(const RbfWarpUnit& unit, const Vec2& s) {
  const double inv = 1.0 / (2.0 * unit.radius * unit.radius);
  Vec2 out = s;
  for (std::size_t k = 0; k < unit.centers.size(); ++k) {
    if (unit.weights[k] == 0.0) continue;
    const Vec2 d = s - unit.centers[k];
    out += unit.weights[k] * std::exp(-d.squaredNorm() * inv) * d;
  }
  return out;
}

Eigen::Matrix2d rbf_jacobian(const RbfWarpUnit& unit, const Vec2& s) {
  const double inv_r2 = 1.0 / (unit.radius * unit.radius);
  Eigen::Matrix2d j = Eigen::Matrix2d::Identity();
  for (std::size_t k = 0; k < unit.centers.size(); ++k) {
    if (unit.weights[k] == 0.0) continue;
    const Vec2 d = s - unit.centers[k];
    const double g = std::exp(-0.5 * d.squaredNorm() * inv_r2);
    j += unit.weights[k] * g * (Eigen::Matrix2d::Identity() - d * d.transpose() * inv_r2);
  }
  return j;
}

bool WarpingMap::is_identity() const {
  auto axial_identity = [this](const AxialWarpUnit& u) {
    for (std::size_t i = 1; i < u.weights.size(); ++i)
      if (u.weights[i] != 0.0) return false;
    return normalize || u.weights[0] == 1.0;
  };
  for (const auto& unit : spatial_units) {
    if (const auto* a = std::get_if<AxialWarpUnit>(&unit)) {
      if (!axial_identity(*a)) return false;
    } else {
      for (double b : std::get<RbfWarpUnit>(unit).weights)
        if (b != 0.0) return false;
    }
  }
  return !temporal_unit || axial_identity(*temporal_unit);
}

void WarpingMap::validate() const {
  for (const auto& unit : spatial_units) {
    if (const auto* a = std::get_if<AxialWarpUnit>(&unit)) {
      if (a->axis == Axis::T) throw ConfigError("spatial axial unit must act on s1 or s2");
      a->validate();
    } else {
      std::get<RbfWarpUnit>(unit).validate();
    }
  }
  if (temporal_unit) temporal_unit->validate();
}

std::size_t WarpingMap::spatial_parameter_count() const {
  std::size_t n = 0;
  for (const auto& unit : spatial_units)
    std::visit([&n](const auto& u) { n += u.weights.size(); }, unit);
  return n;
}

std::size_t WarpingMap::parameter_count() const {
  return spatial_parameter_count() + (temporal_unit ? temporal_unit->weights.size() : 0);
}

std::vector<double> WarpingMap::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& unit : spatial_units)
    std::visit([&out](const auto& u) { out.insert(out.end(), u.weights.begin(), u.weights.end()); },
               unit);
  if (temporal_unit)
    out.insert(out.end(), temporal_unit->weights.begin(), temporal_unit->weights.end());
  return out;
}

void WarpingMap::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw Error("warp parameter count mismatch: expected " + std::to_string(parameter_count()) +
                ", got " + std::to_string(values.size()));
  std::size_t k = 0;
  for (auto& unit : spatial_units)
    std::visit(
        [&](auto& u) {
          for (auto& w : u.weights) w = values[k++];
        },
        unit);
  if (temporal_unit)
    for (auto& w : temporal_unit->weights) w = values[k++];
}

Vec2 warp_space(const WarpingMap& map, const Vec2& s) {
  Vec2 x = s;
  for (const auto& unit : map.spatial_units) {
    if (const auto* a = std::get_if<AxialWarpUnit>(&unit)) {
      const int k = coordinate_of(a->axis);
      x[k] = axial_apply(*a, axial_frame(*a, map.normalize), x[k]);
    } else {
      x = rbf_warp(std::get<RbfWarpUnit>(unit), x);
    }
  }
  return x;
}

double warp_time(const WarpingMap& map, double t) {
  if (!map.temporal_unit) return t;
  return axial_apply(*map.temporal_unit, axial_frame(*map.temporal_unit, map.normalize), t);
}

void warp_space_vjp(const WarpingMap& map, const Vec2& s, const Vec2& adjoint,
                    std::span<double> grad) {
  const std::size_t layers = map.spatial_units.size();
  if (layers == 0) return;
  // Layer inputs from the forward pass; compositions are short.
  std::vector<Vec2> inputs(layers);
  std::vector<std::size_t> offsets(layers);
  Vec2 x = s;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    inputs[l] = x;
    offsets[l] = offset;
    const auto& unit = map.spatial_units[l];
    if (const auto* a = std::get_if<AxialWarpUnit>(&unit)) {
      const int k = coordinate_of(a->axis);
      x[k] = axial_apply(*a, axial_frame(*a, map.normalize), x[k]);
      offset += a->weights.size();
    } else {
      const auto& r = std::get<RbfWarpUnit>(unit);
      x = rbf_warp(r, x);
      offset += r.weights.size();
    }
  }

  Vec2 bar = adjoint;
  for (std::size_t l = layers; l-- > 0;) {
    const auto& unit = map.spatial_units[l];
    const Vec2& in = inputs[l];
    if (const auto* a = std::get_if<AxialWarpUnit>(&unit)) {
      const int k = coordinate_of(a->axis);
      const auto local = grad.subspan(offsets[l], a->weights.size());
      bar[k] *= axial_vjp(*a, axial_frame(*a, map.normalize), in[k], bar[k], local);
    } else {
      const auto& r = std::get<RbfWarpUnit>(unit);
      const double inv = 1.0 / (2.0 * r.radius * r.radius);
      for (std::size_t c = 0; c < r.centers.size(); ++c) {
        const Vec2 d = in - r.centers[c];
        grad[offsets[l] + c] += std::exp(-d.squaredNorm() * inv) * bar.dot(d);
      }
      bar = rbf_jacobian(r, in).transpose() * bar;
    }
  }
}

void warp_time_vjp(const WarpingMap& map, double t, double adjoint, std::span<double> grad) {
  if (!map.temporal_unit) return;
  axial_vjp(*map.temporal_unit, axial_frame(*map.temporal_unit, map.normalize), t, adjoint, grad);
}

InjectivityReport check_injectivity(const WarpingMap& map, int grid_resolution, double lo,
                                    double hi) {
  if (grid_resolution < 2) throw Error("injectivity grid needs at least 2 points per side");
  const double step = (hi - lo) / (grid_resolution - 1);
  const double h = 1e-6 * (hi - lo);
  InjectivityReport report;
  report.min_determinant = std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid_resolution; ++j) {
    for (int i = 0; i < grid_resolution; ++i) {
      const Vec2 s(lo + step * i, lo + step * j);
      const Vec2 dx = (warp_space(map, s + Vec2(h, 0)) - warp_space(map, s - Vec2(h, 0))) / (2 * h);
      const Vec2 dy = (warp_space(map, s + Vec2(0, h)) - warp_space(map, s - Vec2(0, h))) / (2 * h);
      const double det = dx.x() * dy.y() - dx.y() * dy.x();
      if (det < report.min_determinant) {
        report.min_determinant = det;
        report.location = s;
      }
    }
  }
  return report;
}

CoordinateScaler CoordinateScaler::from_bounds(double s1_lo, double s1_hi, double s2_lo,
                                               double s2_hi, double t_lo, double t_hi) {
  CoordinateScaler c;
  c.s1_center = 0.5 * (s1_lo + s1_hi);
  c.s2_center = 0.5 * (s2_lo + s2_hi);
  c.s_scale = std::max(s1_hi - s1_lo, s2_hi - s2_lo);
  if (!(c.s_scale > 0.0)) c.s_scale = 1.0;
  c.t_center = 0.5 * (t_lo + t_hi);
  c.t_scale = t_hi - t_lo;
  if (!(c.t_scale > 0.0)) c.t_scale = 1.0;
  return c;
}

}  // namespace stwarp
