#include "ppf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ppf/kdtree.hpp"

namespace ppf {

double angle_between(const Vec3& a, const Vec3& b) {
  // atan2 form keeps precision near 0 and pi where acos does not.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle,
                                               const Vec3& translation) {
  return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), translation};
}

RigidTransform RigidTransform::rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return {r, Vec3::Zero()};
}

RigidTransform RigidTransform::inverse() const {
  Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const Mat3 should_be_identity = rotation_.transpose() * rotation_;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation_.determinant() - 1.0) <= tol;
}

RigidTransform RigidTransform::orthonormalized() const {
  Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
  return {u * v.transpose(), translation_};
}

double rotation_distance(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  // Angle from the rotation vector norm; stable for small angles.
  return Eigen::AngleAxisd(rel).angle();
}

double exact_diameter(std::span<const Vec3> points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

double approximate_diameter(std::span<const Vec3> points, int cells) {
  if (points.size() < 2) return 0.0;
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double cell = std::max((hi - lo).maxCoeff() / std::max(cells, 1), 1e-12);
  std::unordered_map<std::uint64_t, std::size_t> first;
  std::vector<Vec3> reps;
  for (const auto& p : points) {
    const auto ix = static_cast<std::uint64_t>((p.x() - lo.x()) / cell);
    const auto iy = static_cast<std::uint64_t>((p.y() - lo.y()) / cell);
    const auto iz = static_cast<std::uint64_t>((p.z() - lo.z()) / cell);
    const std::uint64_t key = (ix << 42) | (iy << 21) | iz;
    if (first.emplace(key, reps.size()).second) reps.push_back(p);
  }
  return exact_diameter(reps);
}

OrientedPointCloud::OrientedPointCloud(std::vector<Vec3> points, std::vector<Vec3> normals)
    : points_(std::move(points)), normals_(std::move(normals)) {
  if (points_.size() != normals_.size()) {
    throw std::invalid_argument("OrientedPointCloud: points and normals differ in length");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw std::invalid_argument("OrientedPointCloud: non-finite point");
    }
    if (!is_unit(normals_[i])) {
      throw std::invalid_argument("OrientedPointCloud: normal is not unit length");
    }
  }
}

OrientedPointCloud::OrientedPointCloud(const OrientedPointCloud& other)
    : points_(other.points_),
      normals_(other.normals_),
      diameter_(other.diameter_.load(std::memory_order_relaxed)) {}

OrientedPointCloud& OrientedPointCloud::operator=(const OrientedPointCloud& other) {
  if (this != &other) {
    points_ = other.points_;
    normals_ = other.normals_;
    diameter_.store(other.diameter_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  }
  return *this;
}

OrientedPointCloud::OrientedPointCloud(OrientedPointCloud&& other) noexcept
    : points_(std::move(other.points_)),
      normals_(std::move(other.normals_)),
      diameter_(other.diameter_.load(std::memory_order_relaxed)) {
  other.diameter_.store(-1.0, std::memory_order_relaxed);
}

OrientedPointCloud& OrientedPointCloud::operator=(OrientedPointCloud&& other) noexcept {
  if (this != &other) {
    points_ = std::move(other.points_);
    normals_ = std::move(other.normals_);
    diameter_.store(other.diameter_.load(std::memory_order_relaxed), std::memory_order_relaxed);
    other.diameter_.store(-1.0, std::memory_order_relaxed);
  }
  return *this;
}

double OrientedPointCloud::diameter() const {
  double d = diameter_.load(std::memory_order_relaxed);
  if (d < 0.0) {
    d = exact_diameter(points_);
    diameter_.store(d, std::memory_order_relaxed);
  }
  return d;
}

OrientedPointCloud apply_transform(const RigidTransform& t, const OrientedPointCloud& c) {
  OrientedPointCloud out;
  out.points_.reserve(c.size());
  out.normals_.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    out.points_.push_back(t.apply(c.point(i)));
    out.normals_.push_back(t.rotate(c.normal(i)).normalized());
  }
  out.diameter_.store(c.diameter_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  return out;
}

bool pca_normal(std::span<const Vec3> points, Vec3& normal) {
  if (points.size() < 3) return false;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Eigen::Vector3d& ev = eig.eigenvalues();  // ascending
  // Need a well-defined plane: the two largest eigenvalues must be non-zero
  // and the middle one clearly separated from zero.
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) return false;
  normal = eig.eigenvectors().col(0).normalized();
  return normal.allFinite();
}

OrientedPointCloud estimate_normals(std::span<const Vec3> points, int k, const Vec3& viewpoint,
                                    std::vector<std::size_t>* kept) {
  if (k < 3) throw std::invalid_argument("estimate_normals: k must be at least 3");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("estimate_normals: fewer points than neighbors requested");
  }
  KdTree tree(points);
  std::vector<Vec3> out_points, out_normals;
  std::vector<Vec3> hood;
  if (kept) kept->clear();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nn = tree.knn(points[i], k);
    hood.clear();
    for (auto j : nn) hood.push_back(points[j]);
    Vec3 n;
    if (!pca_normal(hood, n)) continue;
    if (n.dot(viewpoint - points[i]) < 0.0) n = -n;
    out_points.push_back(points[i]);
    out_normals.push_back(n);
    if (kept) kept->push_back(i);
  }
  return {std::move(out_points), std::move(out_normals)};
}

}  // namespace ppf
