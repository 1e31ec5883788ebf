#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "ppf/camera.hpp"
#include "ppf/matching.hpp"
#include "ppf/render.hpp"

namespace ppf {

struct VerifyParams {
  int rescore_top = 500;
  int icp_top = 200;
  std::optional<double> fit_thresh;       ///< mm; default 2 * leaf
  int icp_iters = 15;
  std::optional<double> icp_reject_dist;  ///< mm; default 2.5 * leaf
  double icp_reject_angle = std::numbers::pi / 4.0;
  double occlusion_margin = 10.0;  ///< mm
  double nonconsistent_max = 0.1;
  double edge_depth_jump = 40.0;   ///< mm
  int edge_dilation = 2;           ///< px
  double edge_overlap_min = 0.3;
  int workers = 1;

  void validate() const;
  double fit(double leaf) const { return fit_thresh.value_or(2.0 * leaf); }
  double reject_dist(double leaf) const { return icp_reject_dist.value_or(2.5 * leaf); }
};

/// Per-scene data shared by all hypotheses: the depth map, back-projected
/// points with grid normals, and the dilated depth-edge map.
class SceneView {
 public:
  SceneView(DepthImage depth, const CameraIntrinsics& cam, const VerifyParams& params,
            double normal_radius);

  const DepthImage& depth() const { return depth_; }
  const CameraIntrinsics& camera() const { return cam_; }
  const OrganizedCloud& organized() const { return organized_; }
  bool edge(int u, int v) const { return edges_[std::size_t(v) * cam_.width + u] != 0; }
  const std::vector<std::uint8_t>& edge_map() const { return edges_; }

 private:
  DepthImage depth_;
  CameraIntrinsics cam_;
  OrganizedCloud organized_;
  std::vector<std::uint8_t> edges_;
};

/// Depth-discontinuity edges: both pixels of a 4-neighbor pair are marked
/// when exactly one is missing or their depths differ by more than `jump`;
/// the result is dilated by a (2 * dilation + 1)^2 square.
std::vector<std::uint8_t> depth_edges(const DepthImage& depth, double jump, int dilation);

/// What the verifier needs from the model: a renderer and the oriented
/// sample points used for refinement.
struct ModelView {
  Renderer renderer;
  OrientedPointCloud points;
  double leaf;
};

/// Fraction of rendered pixels with a scene measurement whose depths agree
/// within fit_thresh. 0 when there is no such pixel.
double rescore(const RigidTransform& pose, const SceneView& scene, const ModelView& model,
               const VerifyParams& params);

struct IcpStep {
  double rms_before;  ///< point-to-plane RMS at the start of the step
  double rms_after;   ///< same correspondences, updated pose
  std::size_t correspondences;
};

struct IcpResult {
  PoseHypothesis hypothesis;
  std::vector<IcpStep> steps;  ///< accepted steps only
  int iterations = 0;
  bool low_support = false;
};

/// Point-to-plane ICP with projective data association: model points are
/// projected into the depth image and paired with the scene point at that
/// pixel. Back-facing model points are skipped. Steps that would raise the
/// RMS on the current correspondences are rejected and end the loop.
///
/// Point-to-plane residuals use the model point's normal: the model normals
/// are exact while scene normals are smoothed estimates. Point-to-point is
/// available as a baseline.
enum class IcpMetric { kPointToPlane, kPointToPoint };

IcpResult projective_icp(const PoseHypothesis& h, const SceneView& scene, const ModelView& model,
                         const VerifyParams& params, IcpMetric metric = IcpMetric::kPointToPlane);

struct ConsistencyStats {
  std::size_t measured = 0;        ///< mask pixels with a scene measurement
  std::size_t nonconsistent = 0;   ///< rendered in front of the scene by more than the margin
  std::size_t occluded = 0;        ///< rendered behind the scene by more than the margin
  double fraction() const { return measured ? double(nonconsistent) / measured : 1.0; }
};

ConsistencyStats consistency_stats(const RigidTransform& pose, const SceneView& scene,
                                   const ModelView& model, const VerifyParams& params);
bool consistency_filter(const RigidTransform& pose, const SceneView& scene, const ModelView& model,
                        const VerifyParams& params);

struct EdgeOverlapStats {
  std::size_t silhouette = 0;
  std::size_t on_edge = 0;
  double rate() const { return silhouette ? double(on_edge) / silhouette : 0.0; }
};

EdgeOverlapStats edge_overlap_stats(const RigidTransform& pose, const SceneView& scene,
                                    const ModelView& model);
bool edge_overlap_filter(const RigidTransform& pose, const SceneView& scene, const ModelView& model,
                         const VerifyParams& params);

struct VerifyOutcome {
  std::optional<PoseHypothesis> best;
  /// Every rescored hypothesis in final order, with its status.
  std::vector<PoseHypothesis> ranked;
};

/// Rescore the top hypotheses by votes, refine the best icp_top by score,
/// rescore those, then walk the list in score order through the consistency
/// and edge filters; the first survivor is accepted.
VerifyOutcome verify_pipeline(const std::vector<PoseHypothesis>& hyps, const SceneView& scene,
                              const ModelView& model, const VerifyParams& params);

}  // namespace ppf
