#include "ppf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace ppf {

namespace {

constexpr std::size_t kExactDiameterLimit = 5000;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

double model_diameter(const Mesh& mesh) {
  if (mesh.vertices.size() <= kExactDiameterLimit) return exact_diameter(mesh.vertices);
  return approximate_diameter(mesh.vertices);
}

OrientedPointCloud model_samples(const Mesh& mesh, double leaf) {
  if (mesh.has_faces()) return sample_surface(mesh, leaf / 4.0);
  return vertex_cloud(mesh);
}

ModelTable train_model(const Mesh& mesh, const PipelineConfig& cfg) {
  cfg.validate();
  if (mesh.vertices.size() < 2) throw std::invalid_argument("train_model: model has fewer than 2 points");
  const double diameter = model_diameter(mesh);
  if (!(diameter > 0.0)) throw std::invalid_argument("train_model: model has zero extent");
  SubsampleParams sp = cfg.subsample;
  sp.leaf = cfg.leaf_frac * diameter;
  return ModelTable::build(model_samples(mesh, sp.leaf), sp, cfg.quant, cfg.min_pair_angle);
}

ModelView make_model_view(const ModelTable& table, const Mesh* mesh, const PipelineConfig& cfg) {
  if (mesh && mesh->has_faces()) return ModelView{Renderer(*mesh), table.model(), table.leaf()};
  Mesh points;
  points.vertices = table.model().points();
  points.normals = table.model().normals();
  // Subsampled points sit about half a leaf inside the surface rim.
  const double erode = std::max(0.0, cfg.splat_radius - 0.5) * table.leaf();
  return ModelView{Renderer(std::move(points), cfg.splat_radius * table.leaf(), erode), table.model(),
                   table.leaf()};
}

bool DetectionResult::same_outcome(const DetectionResult& o) const {
  return detected == o.detected && pose.rotation() == o.pose.rotation() &&
         pose.translation() == o.pose.translation() && score == o.score && votes == o.votes &&
         low_support == o.low_support && filters.consistency == o.filters.consistency &&
         filters.edge == o.filters.edge &&
         filters.nonconsistent_fraction == o.filters.nonconsistent_fraction &&
         filters.edge_overlap == o.filters.edge_overlap &&
         filters.rejected_consistency == o.filters.rejected_consistency &&
         filters.rejected_edge == o.filters.rejected_edge && scene_points == o.scene_points &&
         raw_hypotheses == o.raw_hypotheses && clusters == o.clusters;
}

nlohmann::json to_json(const DetectionResult& r) {
  auto opt_bool = [](const std::optional<bool>& b) { return b ? nlohmann::json(*b) : nlohmann::json(nullptr); };
  nlohmann::json j{
      {"detected", r.detected},
      {"filters",
       {{"consistency", opt_bool(r.filters.consistency)},
        {"edge_overlap", opt_bool(r.filters.edge)},
        {"nonconsistent_fraction", r.filters.nonconsistent_fraction},
        {"edge_overlap_rate", r.filters.edge_overlap},
        {"rejected_consistency", r.filters.rejected_consistency},
        {"rejected_edge", r.filters.rejected_edge}}},
      {"scene_points", r.scene_points},
      {"raw_hypotheses", r.raw_hypotheses},
      {"clusters", r.clusters},
      {"timings_ms",
       {{"preprocess", r.timings.preprocess_ms},
        {"matching", r.timings.matching_ms},
        {"clustering", r.timings.clustering_ms},
        {"verification", r.timings.verification_ms},
        {"total", r.timings.total_ms}}},
  };
  if (r.detected) {
    j["pose"] = pose_to_json(r.pose);
    j["score"] = r.score;
    j["votes"] = r.votes;
    j["low_support"] = r.low_support;
  } else {
    j["pose"] = nullptr;
  }
  return j;
}

Detector::Detector(const ModelTable& table, ModelView view, const PipelineConfig& cfg)
    : table_(table), view_(std::move(view)), cfg_(cfg) {
  cfg_.validate();
}

DetectionResult Detector::detect(const DepthImage& depth, const CameraIntrinsics& cam) const {
  cam.validate();
  if (depth.width() != cam.width || depth.height() != cam.height) {
    throw std::invalid_argument("detect: depth image size does not match the camera");
  }
  DetectionResult out;
  Stopwatch total, stage;

  const SceneView scene(depth, cam, cfg_.verify, cfg_.scene_normal_radius * table_.leaf());
  const OrientedPointCloud cloud = to_point_cloud(scene.organized());
  OrientedPointCloud sub;
  if (!cloud.empty()) sub = preprocess_cloud(cloud, table_.subsample_params());
  out.scene_points = sub.size();
  out.timings.preprocess_ms = stage.lap_ms();

  std::vector<PoseHypothesis> hyps;
  if (sub.size() >= 2) hyps = match_scene(table_, sub, cfg_.match);
  out.raw_hypotheses = hyps.size();
  out.timings.matching_ms = stage.lap_ms();

  const auto clustered = cluster_hypotheses(std::move(hyps), cfg_.match, table_.diameter());
  out.clusters = clustered.size();
  out.timings.clustering_ms = stage.lap_ms();

  const VerifyOutcome v = verify_pipeline(clustered, scene, view_, cfg_.verify);
  for (const auto& h : v.ranked) {
    if (h.status == HypothesisStatus::kRejectedConsistency) ++out.filters.rejected_consistency;
    if (h.status == HypothesisStatus::kRejectedEdge) ++out.filters.rejected_edge;
  }
  if (v.best) {
    out.detected = true;
    out.pose = v.best->pose;
    out.score = v.best->score;
    out.votes = v.best->votes;
    out.low_support = v.best->low_support;
    out.filters.consistency = true;
    out.filters.edge = true;
    out.filters.nonconsistent_fraction = consistency_stats(out.pose, scene, view_, cfg_.verify).fraction();
    out.filters.edge_overlap = edge_overlap_stats(out.pose, scene, view_).rate();
  } else if (!v.ranked.empty()) {
    // Report the verdicts of the best-ranked hypothesis.
    const auto& h = v.ranked.front();
    const auto cs = consistency_stats(h.pose, scene, view_, cfg_.verify);
    const auto es = edge_overlap_stats(h.pose, scene, view_);
    out.filters.consistency = h.status != HypothesisStatus::kRejectedConsistency;
    if (*out.filters.consistency) out.filters.edge = false;
    out.filters.nonconsistent_fraction = cs.fraction();
    out.filters.edge_overlap = es.rate();
  }
  out.timings.verification_ms = stage.lap_ms();
  out.timings.total_ms = total.lap_ms();
  return out;
}

}  // namespace ppf
