#include "fixtures.hpp"

#include <numbers>

#include "ppf/pipeline.hpp"
#include "ppf/render.hpp"

namespace ppf::testing {

CameraIntrinsics test_camera() { return {572.0, 572.0, 320.0, 240.0, 640, 480}; }

const Mesh& blob_mesh() {
  static const Mesh mesh = make_blob(kBlobRadius);
  return mesh;
}

const ModelTable& blob_table() {
  static const ModelTable table = train_model(blob_mesh(), PipelineConfig{});
  return table;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  while (true) {
    const Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

RigidTransform random_transform(std::mt19937_64& rng, double translation_range) {
  std::uniform_real_distribution<double> u(-translation_range, translation_range);
  return {random_rotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

RigidTransform random_object_pose(std::mt19937_64& rng, double depth, double lateral) {
  std::uniform_real_distribution<double> u(-lateral, lateral);
  return {random_rotation(rng), Vec3(u(rng), u(rng), depth)};
}

RigidTransform perturb(const RigidTransform& pose, double angle, double distance, std::mt19937_64& rng) {
  const Mat3 r = Eigen::AngleAxisd(angle, random_unit(rng)).toRotationMatrix();
  // Rotate about the object's own origin so the translation error stays `distance`.
  const Vec3 t = pose.translation() + distance * random_unit(rng);
  return {r * pose.rotation(), t};
}

OrientedPointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Vec3> pts, nrm;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(u(rng), u(rng), u(rng));
    nrm.push_back(random_unit(rng));
  }
  return {std::move(pts), std::move(nrm)};
}

SceneSpec plain_scene(const RigidTransform& pose, double noise_sigma, std::uint64_t seed) {
  SceneSpec s;
  s.model_id = "blob";
  s.gt_pose = pose;
  s.camera = test_camera();
  s.noise_sigma = noise_sigma;
  s.seed = seed;
  return s;
}

bool add_occluder(SceneSpec& spec, const Mesh& model, double min_occlusion, double max_occlusion,
                  std::mt19937_64& rng) {
  const auto& cam = spec.camera;
  const DepthImage object = render_depth(model, spec.gt_pose, cam);
  const std::size_t total = object.measured_count();
  if (total == 0) return false;
  const Vec3 center = spec.gt_pose.translation();
  std::uniform_real_distribution<double> side(40.0, 140.0), offset(-1.0, 1.0), angle(0.0, 2.0 * std::numbers::pi);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Primitive box;
    box.kind = Primitive::Kind::kBox;
    box.size = Vec3(side(rng), side(rng), 20.0);
    const double depth = center.z() - 200.0;
    const double scale = depth / center.z();
    const double a = angle(rng);
    const double reach = 0.6 * (box.size.x() + box.size.y()) / 2.0 + 40.0;
    const Vec3 pos(center.x() * scale + std::cos(a) * reach * std::abs(offset(rng)),
                   center.y() * scale + std::sin(a) * reach * std::abs(offset(rng)), depth);
    box.pose = RigidTransform::from_axis_angle(Vec3::UnitZ(), angle(rng), pos);
    const DepthImage occ = render_depth(box.mesh(), RigidTransform::identity(), cam);
    std::size_t hidden = 0;
    for (std::size_t i = 0; i < occ.data().size(); ++i) {
      const float o = object.data()[i], b = occ.data()[i];
      if (o > 0.0f && b > 0.0f && b < o) ++hidden;
    }
    const double frac = double(hidden) / double(total);
    if (frac >= min_occlusion && frac <= max_occlusion) {
      spec.distractors.push_back(box);
      return true;
    }
  }
  return false;
}

}  // namespace ppf::testing
