#pragma once

#include <atomic>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ppf {

/// Positions in millimeters; normals are unit length.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Tolerance used to validate unit normals.
inline constexpr double kUnitTolerance = 1e-6;

inline bool is_unit(const Vec3& v, double tol = kUnitTolerance) {
  return std::abs(v.norm() - 1.0) <= tol;
}

/// Angle between two directions, in radians, robust to rounding.
double angle_between(const Vec3& a, const Vec3& b);

/// Proper rigid motion x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& translation = Vec3::Zero());
  static RigidTransform rot_x(double angle);
  static RigidTransform translation_only(const Vec3& t) { return {Mat3::Identity(), t}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& n) const { return rotation_ * n; }

  RigidTransform inverse() const;
  /// (a * b)(x) == a(b(x))
  RigidTransform operator*(const RigidTransform& other) const;

  /// Orthonormal with det +1 within `tol`.
  bool is_valid(double tol = 1e-6) const;

  /// Project the rotation back onto SO(3) (polar decomposition via SVD).
  RigidTransform orthonormalized() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Geodesic angle of R_a^T R_b, radians in [0, pi].
double rotation_distance(const Mat3& a, const Mat3& b);

/// Exact O(n^2) maximum pairwise distance.
double exact_diameter(std::span<const Vec3> points);

/// Diameter estimate for large inputs: exact on the set of first points per
/// occupied cell of a grid with `cells` divisions along the longest bbox side.
/// Underestimates the true value by at most one cell diagonal.
double approximate_diameter(std::span<const Vec3> points, int cells = 64);

/// Points with unit normals. The diameter is computed on first request and
/// cached; concurrent readers may race to compute it, which is benign since
/// the value is deterministic.
class OrientedPointCloud {
 public:
  OrientedPointCloud() = default;
  /// Throws std::invalid_argument when sizes differ or a normal is not unit.
  OrientedPointCloud(std::vector<Vec3> points, std::vector<Vec3> normals);

  OrientedPointCloud(const OrientedPointCloud& other);
  OrientedPointCloud& operator=(const OrientedPointCloud& other);
  OrientedPointCloud(OrientedPointCloud&& other) noexcept;
  OrientedPointCloud& operator=(OrientedPointCloud&& other) noexcept;

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const std::vector<Vec3>& points() const { return points_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const Vec3& point(std::size_t i) const { return points_[i]; }
  const Vec3& normal(std::size_t i) const { return normals_[i]; }

  /// Maximum pairwise point distance (exact).
  double diameter() const;

 private:
  friend OrientedPointCloud apply_transform(const RigidTransform&, const OrientedPointCloud&);

  std::vector<Vec3> points_;
  std::vector<Vec3> normals_;
  mutable std::atomic<double> diameter_{-1.0};
};

/// Points mapped by R p + t, normals by R n; the cached diameter carries over.
OrientedPointCloud apply_transform(const RigidTransform& t, const OrientedPointCloud& c);

/// PCA normals over the k nearest neighbors (the point itself included),
/// flipped so that n . (viewpoint - p) >= 0. Points whose neighborhood is
/// degenerate (rank < 2) are dropped; `kept` receives the surviving input
/// indices when non-null. Throws std::invalid_argument if k < 3 or there
/// are fewer than k points.
OrientedPointCloud estimate_normals(std::span<const Vec3> points, int k, const Vec3& viewpoint,
                                    std::vector<std::size_t>* kept = nullptr);

/// Smallest-eigenvalue eigenvector of the covariance of `points`; returns
/// false for degenerate sets.
bool pca_normal(std::span<const Vec3> points, Vec3& normal);

}  // namespace ppf
