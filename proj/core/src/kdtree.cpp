#include "stwarp/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace stwarp {
namespace {

double dist2(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

void offer(std::vector<Neighbor>& heap, std::size_t k, const Neighbor& cand) {
  if (heap.size() < k) {
    heap.push_back(cand);
    std::push_heap(heap.begin(), heap.end());
  } else if (cand < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end());
  }
}

}  // namespace

KdTree3::KdTree3(std::vector<Point3> points, std::size_t leaf_size)
    : points_(std::move(points)), order_(points_.size()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, points_.size());
  }
}

std::size_t KdTree3::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  node.min_index = *std::min_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order_.begin() + static_cast<std::ptrdiff_t>(end));
  if (end - begin > leaf_size_) {
    Point3 lo = points_[order_[begin]];
    Point3 hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& p = points_[order_[i]];
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
      }
    }
    int axis = 0;
    for (int d = 1; d < 3; ++d)
      if (hi[d] - lo[d] > hi[axis] - lo[axis]) axis = d;
    if (hi[axis] > lo[axis]) {
      const std::size_t mid = begin + (end - begin) / 2;
      auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
      std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
  }
  nodes_[id] = node;
  return id;
}

void KdTree3::search(std::size_t id, const Point3& q, std::size_t k, std::size_t limit,
                     std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[id];
  if (node.min_index >= limit) return;
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const auto idx = order_[i];
      if (idx < limit) offer(heap, k, {dist2(points_[idx], q), idx});
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::size_t near = diff < 0.0 ? node.left : node.right;
  const std::size_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, limit, heap);
  // Points equal to the split value can sit on either side, so the far side
  // is visited whenever it could hold a point at distance <= the worst kept.
  if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, limit, heap);
}

std::vector<Neighbor> KdTree3::nearest(const Point3& query, std::size_t k, std::size_t index_limit) const {
  std::vector<Neighbor> heap;
  if (k == 0 || nodes_.empty()) return heap;
  heap.reserve(k);
  search(0, query, k, index_limit, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

std::vector<Neighbor> brute_force_nearest(std::span<const Point3> points, const Point3& query,
                                          std::size_t k, std::size_t index_limit) {
  std::vector<Neighbor> all;
  const auto limit = std::min(index_limit, points.size());
  all.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) all.push_back({dist2(points[i], query), i});
  const auto keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end());
  all.resize(keep);
  return all;
}

}  // namespace stwarp
