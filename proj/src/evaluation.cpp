#include "ppf/evaluation.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace ppf {

void VSDParams::validate() const {
  if (!(delta > 0.0) || !(tau > 0.0)) throw std::invalid_argument("VSDParams: delta and tau must be positive");
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("VSDParams: t must be in (0, 1)");
}

double vsd_error(const RigidTransform& est, const RigidTransform& gt, const Renderer& model,
                 const DepthImage& scene, const CameraIntrinsics& cam, const VSDParams& params) {
  const DepthRender r_est = model.render(est, cam);
  const DepthRender r_gt = model.render(gt, cam);
  auto visible = [&](float rendered, float s) {
    return rendered > 0.0f && s > 0.0f && double(rendered) <= double(s) + params.delta;
  };
  std::size_t uni = 0, bad = 0;
  auto visit = [&](int u, int v) {
    const float s = scene.at(u, v);
    const float de = r_est.at(u, v), dg = r_gt.at(u, v);
    const bool ve = visible(de, s), vg = visible(dg, s);
    if (!ve && !vg) return;
    ++uni;
    if (!(ve && vg) || std::abs(double(dg) - double(de)) >= params.tau) ++bad;
  };
  // Union of both ROIs; pixels outside them are not covered by either render.
  const int u0 = std::min(r_est.width ? r_est.x0 : cam.width, r_gt.width ? r_gt.x0 : cam.width);
  const int v0 = std::min(r_est.height ? r_est.y0 : cam.height, r_gt.height ? r_gt.y0 : cam.height);
  const int u1 = std::max(r_est.x0 + r_est.width, r_gt.x0 + r_gt.width);
  const int v1 = std::max(r_est.y0 + r_est.height, r_gt.y0 + r_gt.height);
  for (int v = v0; v < v1; ++v) {
    for (int u = u0; u < u1; ++u) visit(u, v);
  }
  return uni == 0 ? 1.0 : double(bad) / double(uni);
}

bool is_correct(double e, const VSDParams& params) { return e < params.t; }

double recall(const std::vector<TargetResult>& results, const VSDParams& params) {
  if (results.empty()) throw std::invalid_argument("recall: no targets");
  std::size_t correct = 0;
  for (const auto& r : results) {
    if (r.vsd_error && is_correct(*r.vsd_error, params)) ++correct;
  }
  return double(correct) / double(results.size());
}

Mesh Primitive::mesh() const {
  Mesh m = kind == Kind::kBox ? make_box(size, 1) : make_uv_sphere(radius, 24, 48);
  return transform_mesh(m, pose);
}

void SceneSpec::validate() const {
  camera.validate();
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("SceneSpec: noise sigma must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("SceneSpec: dropout must be in [0, 1)");
  if (!gt_pose.is_valid()) throw std::invalid_argument("SceneSpec: invalid ground-truth pose");
}

SyntheticScene generate_scene(const SceneSpec& spec, const Mesh& model) {
  spec.validate();
  const auto& cam = spec.camera;
  const DepthImage object = render_depth(model, spec.gt_pose, cam);
  SyntheticScene out;
  out.gt_pose = spec.gt_pose;
  out.object_pixels = object.measured_count();
  if (out.object_pixels == 0) {
    throw std::invalid_argument("generate_scene: object is outside the camera frustum");
  }
  DepthImage depth = object;
  for (const auto& prim : spec.distractors) {
    const DepthImage d = render_depth(prim.mesh(), RigidTransform::identity(), cam);
    for (std::size_t i = 0; i < depth.data().size(); ++i) {
      const float z = d.data()[i];
      float& cell = depth.data()[i];
      if (z > 0.0f && (cell == 0.0f || z < cell)) cell = z;
    }
  }
  for (std::size_t i = 0; i < depth.data().size(); ++i) {
    if (object.data()[i] > 0.0f && depth.data()[i] == object.data()[i]) ++out.visible_object_pixels;
  }
  if (spec.noise_sigma > 0.0 || spec.dropout > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, std::max(spec.noise_sigma, 1e-300));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (auto& d : depth.data()) {
      if (d <= 0.0f) continue;
      const double n = noise(rng);
      const double drop = uniform(rng);
      if (drop < spec.dropout) {
        d = 0.0f;
        continue;
      }
      if (spec.noise_sigma > 0.0) d = static_cast<float>(std::max(double(d) + n, 1e-3));
    }
  }
  out.depth = std::move(depth);
  return out;
}

}  // namespace ppf
