#include "ppf/ppf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ppf {

namespace {

double clamped_acos(double c) { return std::acos(std::clamp(c, -1.0, 1.0)); }

std::int32_t bin_of(double value, double step, int bins) {
  const auto b = static_cast<std::int32_t>(std::floor(value / step));
  return std::clamp(b, 0, bins - 1);
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace

std::optional<PPF> try_compute_ppf(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                                   const Vec3& n2) {
  const Vec3 d = p2 - p1;
  const double dist = d.norm();
  if (!(dist > kMinPairDistance)) return std::nullopt;
  const Vec3 u = d / dist;
  return PPF{dist, clamped_acos(n1.dot(u)), clamped_acos(n2.dot(u)), clamped_acos(n1.dot(n2))};
}

PPF compute_ppf(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  auto f = try_compute_ppf(p1, n1, p2, n2);
  if (!f) throw std::invalid_argument("compute_ppf: coincident points");
  return *f;
}

void QuantizationParams::validate() const {
  if (!(d_max > 0.0)) throw std::invalid_argument("QuantizationParams: d_max must be positive");
  if (n_dist_bins < 1 || n_angle_bins < 1) {
    throw std::invalid_argument("QuantizationParams: bin counts must be at least 1");
  }
  if (!(noise_fraction >= 0.0 && noise_fraction < 0.5)) {
    throw std::invalid_argument("QuantizationParams: noise_fraction must be in [0, 0.5)");
  }
  const double space = static_cast<double>(n_dist_bins) * n_angle_bins * n_angle_bins *
                       n_angle_bins;
  if (space > 4294967295.0) {
    throw std::invalid_argument("QuantizationParams: key space exceeds 32 bits");
  }
}

double QuantizationParams::angle_step() const { return std::numbers::pi / n_angle_bins; }

std::uint32_t QuantizationParams::key_space() const {
  const auto a = static_cast<std::uint32_t>(n_angle_bins);
  return static_cast<std::uint32_t>(n_dist_bins) * a * a * a;
}

std::uint32_t PPFKey::pack(const QuantizationParams& q) const {
  const auto a = static_cast<std::uint32_t>(q.n_angle_bins);
  return ((static_cast<std::uint32_t>(b_dist) * a + static_cast<std::uint32_t>(b1)) * a +
          static_cast<std::uint32_t>(b2)) * a +
         static_cast<std::uint32_t>(b3);
}

PPFKey PPFKey::unpack(std::uint32_t packed, const QuantizationParams& q) {
  const auto a = static_cast<std::uint32_t>(q.n_angle_bins);
  PPFKey k;
  k.b3 = static_cast<std::int32_t>(packed % a);
  packed /= a;
  k.b2 = static_cast<std::int32_t>(packed % a);
  packed /= a;
  k.b1 = static_cast<std::int32_t>(packed % a);
  k.b_dist = static_cast<std::int32_t>(packed / a);
  return k;
}

PPFKey discretize(const PPF& f, const QuantizationParams& q) {
  const double as = q.angle_step();
  return {bin_of(f.dist, q.dist_step(), q.n_dist_bins), bin_of(f.angle_n1_d, as, q.n_angle_bins),
          bin_of(f.angle_n2_d, as, q.n_angle_bins), bin_of(f.angle_n1_n2, as, q.n_angle_bins)};
}

bool KeySet::contains(std::uint32_t k) const {
  return std::find(begin(), end(), k) != end();
}

KeySet neighbor_keys(const PPF& f, const QuantizationParams& q) {
  // Per-dimension candidate bins, base bin first.
  std::array<std::array<std::int32_t, 2>, 4> cand{};
  std::array<int, 4> count{};
  for (int dim = 0; dim < 4; ++dim) {
    const double step = dim == 0 ? q.dist_step() : q.angle_step();
    const int bins = dim == 0 ? q.n_dist_bins : q.n_angle_bins;
    const double x = f[dim] / step;
    const std::int32_t b = bin_of(f[dim], step, bins);
    const double frac = x - b;
    cand[dim][0] = b;
    count[dim] = 1;
    if (b > 0 && frac < q.noise_fraction) {
      cand[dim][count[dim]++] = b - 1;
    } else if (b < bins - 1 && 1.0 - frac < q.noise_fraction) {
      cand[dim][count[dim]++] = b + 1;
    }
  }
  KeySet out;
  for (int i0 = 0; i0 < count[0]; ++i0) {
    for (int i1 = 0; i1 < count[1]; ++i1) {
      for (int i2 = 0; i2 < count[2]; ++i2) {
        for (int i3 = 0; i3 < count[3]; ++i3) {
          out.push(PPFKey{cand[0][i0], cand[1][i1], cand[2][i2], cand[3][i3]}.pack(q));
        }
      }
    }
  }
  return out;
}

RigidTransform intermediate_frame(const Vec3& p, const Vec3& n) {
  Mat3 pre = Mat3::Identity();
  Vec3 m = n;
  if (m.x() < 0.0) {
    pre.diagonal() << -1.0, -1.0, 1.0;  // 180 degrees about z
    m = pre * m;
  }
  // Minimal rotation taking m onto +x; 1 + c >= 1 here so the formula is
  // well conditioned.
  const Vec3 v = m.cross(Vec3::UnitX());
  const double c = m.x();
  const Mat3 k = skew(v);
  const Mat3 rot = (Mat3::Identity() + k + k * k / (1.0 + c)) * pre;
  return {rot, -(rot * p)};
}

double alpha_angle(const RigidTransform& frame, const Vec3& p_other) {
  const Vec3 q = frame.apply(p_other);
  if (std::hypot(q.y(), q.z()) <= 1e-12 * std::max(1.0, std::abs(q.x()))) return 0.0;
  const double a = std::atan2(q.z(), q.y());
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

RigidTransform pose_from_alignment(const RigidTransform& scene_frame,
                                   const RigidTransform& model_frame, double alpha_diff) {
  return scene_frame.inverse() * RigidTransform::rot_x(-alpha_diff) * model_frame;
}

}  // namespace ppf
