#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace stwarp {

using Point3 = std::array<double, 3>;

struct Neighbor {
  double dist2 = 0.0;
  std::size_t index = 0;

  // Ties in distance are broken by index so that results are unique.
  bool operator<(const Neighbor& o) const {
    return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
  }
};

/// Static 3-d tree over a point set (indices are positions in the input).
class KdTree3 {
 public:
  explicit KdTree3(std::vector<Point3> points, std::size_t leaf_size = 16);

  std::size_t size() const { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[i]; }

  /// The k nearest points with index < index_limit, sorted by (distance,
  /// index). Returns fewer than k when fewer candidates exist.
  std::vector<Neighbor> nearest(const Point3& query, std::size_t k,
                                std::size_t index_limit = static_cast<std::size_t>(-1)) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t min_index = 0;  // smallest point index in the subtree
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Point3& q, std::size_t k, std::size_t limit,
              std::vector<Neighbor>& heap) const;

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

/// O(n) reference scan with the same ordering contract as KdTree3::nearest.
std::vector<Neighbor> brute_force_nearest(std::span<const Point3> points, const Point3& query,
                                          std::size_t k,
                                          std::size_t index_limit = static_cast<std::size_t>(-1));

}  // namespace stwarp
