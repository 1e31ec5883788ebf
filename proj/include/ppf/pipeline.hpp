#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "ppf/config.hpp"
#include "ppf/mesh.hpp"
#include "ppf/model_table.hpp"
#include "ppf/verification.hpp"

namespace ppf {

/// Diameter of the raw model: exact up to 5000 points, approximated above.
double model_diameter(const Mesh& mesh);

/// Dense oriented samples of the model surface: points spaced a quarter of
/// the leaf with interpolated mesh normals when there are faces, the
/// vertices otherwise.
OrientedPointCloud model_samples(const Mesh& mesh, double leaf);

/// Resolves the leaf as cfg.leaf_frac of the model diameter and builds the
/// table from the model samples.
ModelTable train_model(const Mesh& mesh, const PipelineConfig& cfg);

/// Verification view of a trained model. Without a mesh (or a mesh without
/// faces) the table's points are rendered as splats.
ModelView make_model_view(const ModelTable& table, const Mesh* mesh, const PipelineConfig& cfg);

struct FilterVerdicts {
  std::optional<bool> consistency;  ///< empty when no hypothesis reached the filter
  std::optional<bool> edge;
  double nonconsistent_fraction = 0.0;
  double edge_overlap = 0.0;
  std::size_t rejected_consistency = 0;
  std::size_t rejected_edge = 0;
};

struct StageTimings {
  double preprocess_ms = 0.0;
  double matching_ms = 0.0;
  double clustering_ms = 0.0;
  double verification_ms = 0.0;
  double total_ms = 0.0;
};

struct DetectionResult {
  bool detected = false;
  RigidTransform pose;
  double score = 0.0;
  std::int64_t votes = 0;
  bool low_support = false;
  FilterVerdicts filters;
  StageTimings timings;
  std::size_t scene_points = 0;  ///< after subsampling
  std::size_t raw_hypotheses = 0;
  std::size_t clusters = 0;

  /// Everything except the timings.
  bool same_outcome(const DetectionResult& other) const;
};

nlohmann::json to_json(const DetectionResult& r);

/// Detects one instance of a trained model in depth images.
class Detector {
 public:
  Detector(const ModelTable& table, ModelView view, const PipelineConfig& cfg);

  DetectionResult detect(const DepthImage& depth, const CameraIntrinsics& cam) const;

  const ModelView& view() const { return view_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  const ModelTable& table_;
  ModelView view_;
  PipelineConfig cfg_;
};

}  // namespace ppf
