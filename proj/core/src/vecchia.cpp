#include "stwarp/vecchia.hpp"

#include "local_conditional.hpp"
#include "stwarp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace stwarp {

std::string to_string(NeighborDomain d) { return d == NeighborDomain::Original ? "G" : "D"; }

std::string to_string(Ordering o) {
  switch (o) {
    case Ordering::MaxMin: return "maxmin";
    case Ordering::Random: return "random";
    case Ordering::Input: return "input";
  }
  return "maxmin";
}

NeighborDomain parse_neighbor_domain(const std::string& s) {
  if (s == "G" || s == "g" || s == "original") return NeighborDomain::Original;
  if (s == "D" || s == "d" || s == "warped") return NeighborDomain::Warped;
  throw ConfigError("unknown neighbor domain '" + s + "' (expected G or D)", "neighbor_domain");
}

Ordering parse_ordering(const std::string& s) {
  if (s == "maxmin") return Ordering::MaxMin;
  if (s == "random") return Ordering::Random;
  if (s == "input") return Ordering::Input;
  throw ConfigError("unknown ordering '" + s + "' (expected maxmin, random or input)", "order");
}

void VecchiaPlan::validate() const {
  const auto n = permutation.size();
  std::vector<bool> seen(n, false);
  for (auto p : permutation) {
    if (p >= n || seen[p]) throw Error("plan permutation is not a bijection");
    seen[p] = true;
  }
  if (neighbors.size() != n) throw Error("plan neighbor sets do not match the point count");
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = neighbors[i];
    if (row.size() != std::min(m, i)) throw Error("neighbor set " + std::to_string(i) + " has wrong size");
    for (auto j : row)
      if (j >= i) throw Error("neighbor set " + std::to_string(i) + " references a later point");
  }
}

std::vector<Point3> scaled_coordinates(std::span<const SpaceTimePoint> pts, double time_scale) {
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p.s1, p.s2, time_scale * p.t});
  return out;
}

double default_time_scale(std::span<const SpaceTimePoint> pts) {
  if (pts.empty()) return 1.0;
  double lo1 = pts[0].s1, hi1 = lo1, lo2 = pts[0].s2, hi2 = lo2, lot = pts[0].t, hit = lot;
  for (const auto& p : pts) {
    lo1 = std::min(lo1, p.s1);
    hi1 = std::max(hi1, p.s1);
    lo2 = std::min(lo2, p.s2);
    hi2 = std::max(hi2, p.s2);
    lot = std::min(lot, p.t);
    hit = std::max(hit, p.t);
  }
  const double spatial = std::hypot(hi1 - lo1, hi2 - lo2);
  const double temporal = hit - lot;
  if (!(spatial > 0.0) || !(temporal > 0.0)) return 1.0;
  return spatial / temporal;
}

std::vector<std::size_t> maxmin_order(std::span<const SpaceTimePoint> pts, double time_scale,
                                      std::uint64_t seed) {
  const auto n = pts.size();
  std::vector<std::size_t> order;
  if (n == 0) return order;
  order.reserve(n);
  const auto xyz = scaled_coordinates(pts, time_scale);
  std::vector<std::uint64_t> priority(n);
  std::mt19937_64 rng(seed);
  for (auto& p : priority) p = rng();

  Point3 centroid{0.0, 0.0, 0.0};
  for (const auto& p : xyz)
    for (int d = 0; d < 3; ++d) centroid[d] += p[d];
  for (int d = 0; d < 3; ++d) centroid[d] /= static_cast<double>(n);

  auto d2 = [](const Point3& a, const Point3& b) {
    const double x = a[0] - b[0], y = a[1] - b[1], z = a[2] - b[2];
    return x * x + y * y + z * z;
  };
  auto better = [&](double da, std::size_t a, double db, std::size_t b) {
    return da > db || (da == db && priority[a] > priority[b]);
  };

  std::size_t first = 0;
  double first_d = d2(xyz[0], centroid);
  for (std::size_t j = 1; j < n; ++j) {
    const double dj = d2(xyz[j], centroid);
    if (dj < first_d || (dj == first_d && priority[j] > priority[first])) {
      first = j;
      first_d = dj;
    }
  }

  // mind[j] < 0 marks points already placed.
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::size_t current = first;
  for (std::size_t step = 0; step < n; ++step) {
    order.push_back(current);
    mind[current] = -1.0;
    if (step + 1 == n) break;
    const Point3 c = xyz[current];
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mind[j] < 0.0) continue;
      const double dj = d2(xyz[j], c);
      if (dj < mind[j]) mind[j] = dj;
      if (best == n || better(mind[j], j, best_d, best)) {
        best = j;
        best_d = mind[j];
      }
    }
    current = best;
  }
  return order;
}

std::vector<std::size_t> random_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i-- > 1;) std::swap(idx[i], idx[static_cast<std::size_t>(rng() % (i + 1))]);
  return idx;
}

NeighborSets find_neighbors(std::span<const SpaceTimePoint> ordered, std::size_t m,
                            NeighborDomain domain, const WarpingMap& warp, double time_scale) {
  if (m == 0) throw ConfigError("neighbor count m must be at least 1", "m");
  const auto n = ordered.size();
  std::vector<SpaceTimePoint> metric_points(ordered.begin(), ordered.end());
  if (domain == NeighborDomain::Warped) metric_points = warp_points(warp, ordered);
  const KdTree3 tree(scaled_coordinates(metric_points, time_scale));

  std::vector<std::vector<std::size_t>> rows(n);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto found = tree.nearest(tree.point(i), std::min(m, i), i);
    auto& row = rows[i];
    row.reserve(found.size());
    for (const auto& nb : found) row.push_back(nb.index);
  }

  NeighborSets sets;
  sets.offsets.reserve(n + 1);
  for (const auto& row : rows) {
    sets.indices.insert(sets.indices.end(), row.begin(), row.end());
    sets.offsets.push_back(sets.indices.size());
  }
  return sets;
}

VecchiaPlan make_plan(std::span<const SpaceTimePoint> pts, const PlanOptions& options,
                      const WarpingMap& warp) {
  VecchiaPlan plan;
  plan.m = options.m;
  plan.domain = options.domain;
  std::vector<SpaceTimePoint> metric(pts.begin(), pts.end());
  if (options.domain == NeighborDomain::Warped) metric = warp_points(warp, pts);
  plan.time_scale = options.time_scale > 0.0 ? options.time_scale : default_time_scale(metric);

  switch (options.ordering) {
    case Ordering::MaxMin: plan.permutation = maxmin_order(metric, plan.time_scale, options.seed); break;
    case Ordering::Random: plan.permutation = random_order(pts.size(), options.seed); break;
    case Ordering::Input:
      plan.permutation.resize(pts.size());
      std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
      break;
  }
  // Neighbors are searched on the raw ordered points; find_neighbors warps
  // them itself for the D domain.
  const auto ordered = apply_permutation<SpaceTimePoint>(pts, plan.permutation);
  plan.neighbors = find_neighbors(ordered, options.m, options.domain, warp, plan.time_scale);
  return plan;
}

double SparseFactors::log_det_precision() const { return -d.array().log().sum(); }

Eigen::VectorXd SparseFactors::whiten(const Eigen::VectorXd& v) const {
  Eigen::VectorXd r = v - a * v;
  return r.array() / d.array().sqrt();
}

SparseFactors build_factors(const NonstationaryCovariance& c, std::span<const SpaceTimePoint> ordered,
                            const VecchiaPlan& plan) {
  const auto n = ordered.size();
  if (plan.size() != n) throw Error("plan does not match the number of points");
  const auto warped = warp_points(c.warp, ordered);
  const double sigma2 = kernel_variance(c.kernel);

  std::vector<Eigen::VectorXd> rows(n);
  Eigen::VectorXd d(static_cast<Eigen::Index>(n));
  bool failed = false;
  std::size_t failed_at = 0;
  std::string failure;
#pragma omp parallel
  {
    Eigen::MatrixXd k;
    Eigen::VectorXd kv;
    Eigen::LLT<Eigen::MatrixXd> llt;
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      try {
        const auto nbrs = plan.neighbors[i];
        detail::local_covariance(c.kernel, c.tau2, warped, i, nbrs, k, kv);
        const double kii = sigma2 + c.tau2;
        if (nbrs.empty()) {
          d[ii] = kii;
          continue;
        }
        detail::factor_local(llt, k, sigma2, i);
        rows[i] = llt.solve(kv);
        d[ii] = kii - kv.dot(rows[i]);
        if (!(d[ii] > 0.0))
          throw NumericalError("non-positive conditional variance at ordered observation " +
                                   std::to_string(i),
                               i);
      } catch (const NumericalError& e) {
#pragma omp critical
        if (!failed || i < failed_at) {
          failed = true;
          failed_at = i;
          failure = e.what();
        }
      }
    }
  }
  if (failed) throw NumericalError(failure, failed_at);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(plan.neighbors.indices.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = plan.neighbors[i];
    for (std::size_t j = 0; j < nbrs.size(); ++j)
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(nbrs[j]), rows[i][static_cast<Eigen::Index>(j)]);
  }
  SparseFactors f;
  f.a.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  f.a.setFromTriplets(triplets.begin(), triplets.end());
  f.d = std::move(d);
  return f;
}

Eigen::SparseMatrix<double> sparse_precision(const SparseFactors& f) {
  const auto n = f.d.size();
  Eigen::SparseMatrix<double> i_minus_a(n, n);
  i_minus_a.setIdentity();
  i_minus_a -= Eigen::SparseMatrix<double>(f.a);
  const Eigen::VectorXd inv_d = f.d.cwiseInverse();
  Eigen::SparseMatrix<double> q = i_minus_a.transpose() * inv_d.asDiagonal() * i_minus_a;
  return q;
}

}  // namespace stwarp
