#include "ppf/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace ppf {

KdTree::KdTree(std::span<const Vec3> points, int leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / std::max(leaf_size, 1) + 1);
    build(0, static_cast<std::uint32_t>(points_.size()), std::max(leaf_size, 1));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int leaf_size) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = points_[order_[begin]];
  node.hi = node.lo;
  for (auto i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  if (end - begin > static_cast<std::uint32_t>(leaf_size)) {
    int axis;
    (node.hi - node.lo).maxCoeff(&axis);
    if (node.hi[axis] > node.lo[axis]) {
      const auto mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](std::uint32_t a, std::uint32_t b) {
                         return points_[a][axis] < points_[b][axis];
                       });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      nodes_[id] = node;
      const auto left = build(begin, mid, leaf_size);
      const auto right = build(mid, end, leaf_size);
      nodes_[id].left = left;
      nodes_[id].right = right;
      return id;
    }
  }
  nodes_[id] = node;
  return id;
}

namespace {

double box_distance_sq(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, const Vec3& p) {
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

}  // namespace

void KdTree::radius_query(const Vec3& center, double radius,
                          std::vector<std::uint32_t>& out) const {
  out.clear();
  if (nodes_.empty() || radius < 0.0) return;
  const double r2 = radius * radius;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_distance_sq(node.lo, node.hi, center) > r2) continue;
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        if ((points_[idx] - center).squaredNorm() <= r2) out.push_back(idx);
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
  std::sort(out.begin(), out.end());
}

std::vector<std::uint32_t> KdTree::radius_query(const Vec3& center, double radius) const {
  std::vector<std::uint32_t> out;
  radius_query(center, radius, out);
  return out;
}

std::vector<std::uint32_t> KdTree::knn(const Vec3& center, int k) const {
  using Item = std::pair<double, std::uint32_t>;  // max-heap on (dist, index)
  std::priority_queue<Item> heap;
  if (k <= 0 || nodes_.empty()) return {};
  const auto kk = static_cast<std::size_t>(k);
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (heap.size() == kk && box_distance_sq(node.lo, node.hi, center) > heap.top().first) {
      continue;
    }
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        const Item item{(points_[idx] - center).squaredNorm(), idx};
        if (heap.size() < kk) {
          heap.push(item);
        } else if (item < heap.top()) {
          heap.pop();
          heap.push(item);
        }
      }
      continue;
    }
    // Visit the nearer child first.
    const bool go_left = center[node.axis] < node.split;
    stack[top++] = go_left ? node.right : node.left;
    stack[top++] = go_left ? node.left : node.right;
  }
  std::vector<std::uint32_t> out(heap.size());
  for (auto i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

}  // namespace ppf
