#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppf/evaluation.hpp"
#include "ppf/matching.hpp"
#include "ppf/preprocess.hpp"
#include "ppf/verification.hpp"

namespace ppf {

/// Everything that influences training and detection. The subsampling leaf
/// is given as a fraction of the model diameter and resolved to mm when the
/// model is trained; `subsample.leaf` is ignored until then.
struct PipelineConfig {
  double leaf_frac = 0.05;
  SubsampleParams subsample;
  QuantizationParams quant;
  double min_pair_angle = 0.0;  ///< radians; model pairs with closer normals are not stored
  MatchParams match;
  VerifyParams verify;
  VSDParams vsd;
  double depth_scale = 0.1;         ///< mm per raw depth count
  double scene_normal_radius = 2.0; ///< in leaves
  int normal_k = 20;                ///< neighbors for normals of point-only models
  double splat_radius = 0.75;       ///< in leaves, for models without faces
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
  /// Worker count copied into the match and verify parameters.
  PipelineConfig with_workers(int n) const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are an error. Accepts a
/// bare config object or a metadata record carrying one under "config".
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

nlohmann::json pose_to_json(const RigidTransform& t);
/// {"R": [9 row-major], "t": [3]}; the rotation must be orthonormal.
RigidTransform pose_from_json(const nlohmann::json& j);

/// Scene description for `synth`. The model path is resolved relative to
/// the spec file; "blob:<radius>" names the built-in test shape.
struct SceneFile {
  SceneSpec spec;
  std::string model;
};

SceneFile parse_scene_spec(const std::string& yaml_text, const std::filesystem::path& base_dir);
SceneFile load_scene_spec(const std::filesystem::path& path);

/// One image of a SIXD-layout scene (info.yml + gt.yml). Camera width and
/// height are zero; they come from the depth image.
struct SixdImage {
  int id = 0;
  CameraIntrinsics camera;
  /// mm per depth count, when info.yml states it.
  std::optional<double> depth_scale;
  /// (obj_id, model-to-camera pose in mm), in file order.
  std::vector<std::pair<int, RigidTransform>> objects;
};

/// Images present in both files, sorted by id.
std::vector<SixdImage> parse_sixd_scene(const std::string& info_yaml, const std::string& gt_yaml);

}  // namespace ppf
