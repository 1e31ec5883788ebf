#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ppf/geometry.hpp"

namespace ppf {

/// Pinhole camera; pixel (u, v) has its center at integer coordinates.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const;
  bool operator==(const CameraIntrinsics&) const = default;
  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  /// Continuous image coordinates of a camera-frame point (z > 0).
  Eigen::Vector2d project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  /// Camera-frame point at pixel (u, v) with the given depth.
  Vec3 back_project(double u, double v, double depth) const {
    return {(u - cx) * depth / fx, (v - cy) * depth / fy, depth};
  }
};

/// Row-major depth map in mm; 0 marks a missing measurement.
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height) : width_(width), height_(height), depth_(std::size_t(width) * height, 0.0f) {}

  int width() const { return width_; }
  int height() const { return height_; }
  float at(int u, int v) const { return depth_[std::size_t(v) * width_ + u]; }
  float& at(int u, int v) { return depth_[std::size_t(v) * width_ + u]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0f; }
  const std::vector<float>& data() const { return depth_; }
  std::vector<float>& data() { return depth_; }
  std::size_t measured_count() const;
  bool operator==(const DepthImage&) const = default;

 private:
  int width_ = 0, height_ = 0;
  std::vector<float> depth_;
};

/// Back-projected measured pixels with normals estimated on the image grid:
/// PCA over samples of a (2r+1)^2 window that lie within `radius_mm` of the
/// center point, oriented toward the camera. Pixels without a stable normal
/// are flagged invalid.
struct OrganizedCloud {
  int width = 0, height = 0;
  std::vector<Vec3> points;   ///< per pixel, zero when missing
  std::vector<Vec3> normals;  ///< per pixel, zero when invalid
  std::vector<std::uint8_t> valid;

  bool has_normal(int u, int v) const { return valid[std::size_t(v) * width + u] != 0; }
  const Vec3& point(int u, int v) const { return points[std::size_t(v) * width + u]; }
  const Vec3& normal(int u, int v) const { return normals[std::size_t(v) * width + u]; }
};

OrganizedCloud organize(const DepthImage& depth, const CameraIntrinsics& cam, double radius_mm);

/// Flat cloud of pixels that carry a valid normal, in row-major order.
OrientedPointCloud to_point_cloud(const OrganizedCloud& oc);

}  // namespace ppf
