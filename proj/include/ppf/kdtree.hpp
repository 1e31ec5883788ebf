#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ppf/geometry.hpp"

namespace ppf {

/// Static 3-d tree over a point set. Built once, then queried concurrently.
/// The point array is copied so the index owns its data.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, int leaf_size = 12);

  std::size_t size() const { return points_.size(); }

  /// Indices i with |p_i - center| <= radius, sorted ascending.
  std::vector<std::uint32_t> radius_query(const Vec3& center, double radius) const;
  void radius_query(const Vec3& center, double radius, std::vector<std::uint32_t>& out) const;

  /// The k nearest indices ordered by distance (ties by index).
  std::vector<std::uint32_t> knn(const Vec3& center, int k) const;

 private:
  struct Node {
    std::uint32_t begin, end;  // range into order_
    std::int32_t left = -1, right = -1;
    int axis = -1;             // -1 for leaves
    double split = 0.0;
    Eigen::Vector3d lo, hi;    // bounding box
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int leaf_size);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace ppf
