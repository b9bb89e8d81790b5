#pragma once

#include "stwarp/covariance.hpp"
#include "stwarp/kdtree.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stwarp {

/// Where distances for ordering and neighbor search are measured: the
/// original domain G or the warped domain D.
enum class NeighborDomain { Original, Warped };
enum class Ordering { MaxMin, Random, Input };

std::string to_string(NeighborDomain d);
std::string to_string(Ordering o);
NeighborDomain parse_neighbor_domain(const std::string& s);
Ordering parse_ordering(const std::string& s);

/// Conditioning sets in compressed form. Indices are ordered positions;
/// row i lists min(m, i) earlier positions sorted by (distance, position).
struct NeighborSets {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const std::size_t> operator[](std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

struct VecchiaPlan {
  /// permutation[k] is the original row placed at ordered position k.
  std::vector<std::size_t> permutation;
  NeighborSets neighbors;
  std::size_t m = 0;
  NeighborDomain domain = NeighborDomain::Original;
  double time_scale = 1.0;

  std::size_t size() const { return permutation.size(); }
  void validate() const;
};

/// (s1, s2, time_scale * t) for every point.
std::vector<Point3> scaled_coordinates(std::span<const SpaceTimePoint> pts, double time_scale);

/// Spatial bounding-box diagonal over temporal range (1 when degenerate).
double default_time_scale(std::span<const SpaceTimePoint> pts);

/// Exact maximum-minimum-distance ordering: starts at the point nearest the
/// centroid, then repeatedly takes the point farthest from everything chosen.
/// Exact distance ties are broken by a seeded random priority.
std::vector<std::size_t> maxmin_order(std::span<const SpaceTimePoint> pts, double time_scale,
                                      std::uint64_t seed);
std::vector<std::size_t> random_order(std::size_t n, std::uint64_t seed);

/// Nearest earlier neighbors of each ordered point under the scaled metric,
/// measured on raw coordinates or on their warped images.
NeighborSets find_neighbors(std::span<const SpaceTimePoint> ordered, std::size_t m,
                            NeighborDomain domain, const WarpingMap& warp, double time_scale);

struct PlanOptions {
  std::size_t m = 30;
  double time_scale = 0.0;  // <= 0 selects default_time_scale
  NeighborDomain domain = NeighborDomain::Original;
  Ordering ordering = Ordering::MaxMin;
  std::uint64_t seed = 0;
};

VecchiaPlan make_plan(std::span<const SpaceTimePoint> pts, const PlanOptions& options,
                      const WarpingMap& warp = {});

template <typename T>
std::vector<T> apply_permutation(std::span<const T> values, std::span<const std::size_t> perm) {
  std::vector<T> out;
  out.reserve(perm.size());
  for (auto p : perm) out.push_back(values[p]);
  return out;
}

/// A (strictly lower triangular, row-major) and the diagonal of D such that
/// the approximate precision is (I - A)' D^{-1} (I - A).
struct SparseFactors {
  Eigen::SparseMatrix<double, Eigen::RowMajor> a;
  Eigen::VectorXd d;

  /// -sum log D_ii
  double log_det_precision() const;
  /// D^{-1/2} (I - A) v
  Eigen::VectorXd whiten(const Eigen::VectorXd& v) const;
};

/// Rows of A and entries of D from the observed-data covariance (process
/// plus nugget) of ordered points.
SparseFactors build_factors(const NonstationaryCovariance& c, std::span<const SpaceTimePoint> ordered,
                            const VecchiaPlan& plan);

Eigen::SparseMatrix<double> sparse_precision(const SparseFactors& f);

/// Relative diagonal jitter used once when a conditioning covariance is not
/// numerically positive definite.
inline constexpr double kConditioningJitter = 1e-8;

}  // namespace stwarp
