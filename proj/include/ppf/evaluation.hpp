#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppf/camera.hpp"
#include "ppf/mesh.hpp"
#include "ppf/render.hpp"

namespace ppf {

/// Visible Surface Discrepancy tolerances.
struct VSDParams {
  double delta = 15.0;  ///< visibility tolerance, mm
  double tau = 20.0;    ///< depth mismatch tolerance, mm
  double t = 0.35;      ///< correctness threshold on the error

  void validate() const;
};

/// VSD error in [0, 1] between two poses of the same model, judged against
/// the scene depth. Visibility of a rendered pixel requires a scene
/// measurement and rendered <= scene + delta. Depth values are camera z.
double vsd_error(const RigidTransform& est, const RigidTransform& gt, const Renderer& model,
                 const DepthImage& scene, const CameraIntrinsics& cam, const VSDParams& params);

/// e < t (strict).
bool is_correct(double e, const VSDParams& params);

/// One annotated target; `vsd_error` is empty when no pose was emitted.
struct TargetResult {
  std::optional<double> vsd_error;
};

/// Fraction of targets with a correct pose. Throws std::invalid_argument
/// on an empty list.
double recall(const std::vector<TargetResult>& results, const VSDParams& params);

struct Primitive {
  enum class Kind { kBox, kSphere };
  Kind kind = Kind::kBox;
  RigidTransform pose;              ///< object-to-camera
  Vec3 size = Vec3::Constant(10.0); ///< box edge lengths, mm
  double radius = 10.0;             ///< sphere radius, mm

  Mesh mesh() const;
};

struct SceneSpec {
  std::string model_id = "model";
  RigidTransform gt_pose;  ///< model-to-camera
  CameraIntrinsics camera;
  std::vector<Primitive> distractors;
  double noise_sigma = 0.0;  ///< mm, additive Gaussian on measured pixels
  double dropout = 0.0;      ///< probability of removing a measured pixel
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  DepthImage depth;
  RigidTransform gt_pose;
  /// Object pixels that are visible (not covered by distractors), before noise.
  std::size_t visible_object_pixels = 0;
  std::size_t object_pixels = 0;
};

/// Z-buffer composite of the model at its pose and the distractors, then
/// noise and dropout from a generator seeded with spec.seed. Throws
/// std::invalid_argument when the object renders no pixel.
SyntheticScene generate_scene(const SceneSpec& spec, const Mesh& model);

}  // namespace ppf
