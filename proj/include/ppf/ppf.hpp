#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "ppf/geometry.hpp"

namespace ppf {

/// Point pair feature of an ordered oriented pair (p1, n1) -> (p2, n2):
/// segment length and the three angles n1/d, n2/d, n1/n2.
struct PPF {
  double dist = 0.0;
  double angle_n1_d = 0.0;
  double angle_n2_d = 0.0;
  double angle_n1_n2 = 0.0;

  double operator[](int i) const {
    return i == 0 ? dist : i == 1 ? angle_n1_d : i == 2 ? angle_n2_d : angle_n1_n2;
  }
};

/// Pairs closer than this are considered coincident.
inline constexpr double kMinPairDistance = 1e-9;

/// Throws std::invalid_argument for coincident points.
PPF compute_ppf(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);
std::optional<PPF> try_compute_ppf(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

struct QuantizationParams {
  double d_max = 1.0;  ///< mm, the model diameter
  int n_dist_bins = 20;
  int n_angle_bins = 15;
  /// A neighbor bin is also voted when the value lies closer than this
  /// fraction of a bin width to the shared boundary.
  double noise_fraction = 0.2;

  void validate() const;
  double dist_step() const { return d_max / n_dist_bins; }
  double angle_step() const;
  /// Number of distinct packed keys.
  std::uint32_t key_space() const;
};

struct PPFKey {
  std::int32_t b_dist = 0, b1 = 0, b2 = 0, b3 = 0;

  std::int32_t operator[](int i) const {
    return i == 0 ? b_dist : i == 1 ? b1 : i == 2 ? b2 : b3;
  }
  /// b_dist * A^3 + b1 * A^2 + b2 * A + b3 for A angle bins.
  std::uint32_t pack(const QuantizationParams& q) const;
  static PPFKey unpack(std::uint32_t packed, const QuantizationParams& q);
  auto operator<=>(const PPFKey&) const = default;
};

PPFKey discretize(const PPF& f, const QuantizationParams& q);

/// Fixed-capacity set of packed keys: the base key plus at most 15
/// quantization-noise neighbors.
class KeySet {
 public:
  static constexpr int kCapacity = 16;
  int size() const { return size_; }
  std::uint32_t operator[](int i) const { return keys_[i]; }
  const std::uint32_t* begin() const { return keys_.data(); }
  const std::uint32_t* end() const { return keys_.data() + size_; }
  bool contains(std::uint32_t k) const;
  void push(std::uint32_t k) { keys_[size_++] = k; }

 private:
  std::array<std::uint32_t, kCapacity> keys_{};
  int size_ = 0;
};

/// Base key plus, per dimension independently, the adjacent bin whose
/// boundary lies within noise_fraction of a bin width of the value. Bins are
/// clamped to the valid range (no wrap-around). The first element is always
/// the base key.
KeySet neighbor_keys(const PPF& f, const QuantizationParams& q);

/// Rigid transform taking p to the origin and n onto +x. The roll about x is
/// the minimal rotation (Rodrigues about n x x_hat); for normals in the
/// hemisphere around -x a 180 degree turn about z is applied first.
RigidTransform intermediate_frame(const Vec3& p, const Vec3& n);

/// Angle of frame(p_other) about the x axis: atan2(z, y) in (-pi, pi].
/// Points on the x axis give 0.
double alpha_angle(const RigidTransform& frame, const Vec3& p_other);

/// Pose mapping a model pair onto a scene pair given their frames and the
/// alpha difference alpha_m - alpha_s: T_s^-1 * R_x(-(alpha_m - alpha_s)) * T_m.
RigidTransform pose_from_alignment(const RigidTransform& scene_frame,
                                   const RigidTransform& model_frame, double alpha_diff);

}  // namespace ppf
