#include "ppf/verification.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "ppf/parallel.hpp"

namespace ppf {

void VerifyParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("VerifyParams: ") + name + " must be positive");
  };
  auto fraction = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(std::string("VerifyParams: ") + name + " must be in (0, 1)");
  };
  if (rescore_top < 1 || icp_top < 0 || icp_iters < 0 || edge_dilation < 0 || workers < 1) {
    throw std::invalid_argument("VerifyParams: counts out of range");
  }
  if (fit_thresh) positive(*fit_thresh, "fit_thresh");
  if (icp_reject_dist) positive(*icp_reject_dist, "icp_reject_dist");
  positive(icp_reject_angle, "icp_reject_angle");
  positive(occlusion_margin, "occlusion_margin");
  positive(edge_depth_jump, "edge_depth_jump");
  fraction(nonconsistent_max, "nonconsistent_max");
  fraction(edge_overlap_min, "edge_overlap_min");
}

std::vector<std::uint8_t> depth_edges(const DepthImage& depth, double jump, int dilation) {
  const int w = depth.width(), h = depth.height();
  std::vector<std::uint8_t> raw(std::size_t(w) * h, 0);
  auto discontinuous = [&](float a, float b) {
    const bool ma = a > 0.0f, mb = b > 0.0f;
    if (ma != mb) return true;
    return ma && std::abs(double(a) - double(b)) > jump;
  };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const float d = depth.at(u, v);
      if (u + 1 < w && discontinuous(d, depth.at(u + 1, v))) {
        raw[std::size_t(v) * w + u] = raw[std::size_t(v) * w + u + 1] = 1;
      }
      if (v + 1 < h && discontinuous(d, depth.at(u, v + 1))) {
        raw[std::size_t(v) * w + u] = raw[std::size_t(v + 1) * w + u] = 1;
      }
    }
  }
  if (dilation <= 0) return raw;
  // Separable max filter.
  std::vector<std::uint8_t> tmp(raw.size(), 0), out(raw.size(), 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!raw[std::size_t(v) * w + u]) continue;
      for (int x = std::max(0, u - dilation); x <= std::min(w - 1, u + dilation); ++x) {
        tmp[std::size_t(v) * w + x] = 1;
      }
    }
  }
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!tmp[std::size_t(v) * w + u]) continue;
      for (int y = std::max(0, v - dilation); y <= std::min(h - 1, v + dilation); ++y) {
        out[std::size_t(y) * w + u] = 1;
      }
    }
  }
  return out;
}

SceneView::SceneView(DepthImage depth, const CameraIntrinsics& cam, const VerifyParams& params,
                     double normal_radius)
    : depth_(std::move(depth)), cam_(cam) {
  cam_.validate();
  if (depth_.width() != cam_.width || depth_.height() != cam_.height) {
    throw std::invalid_argument("SceneView: depth image does not match the camera size");
  }
  organized_ = organize(depth_, cam_, normal_radius);
  edges_ = depth_edges(depth_, params.edge_depth_jump, params.edge_dilation);
}

double rescore(const RigidTransform& pose, const SceneView& scene, const ModelView& model,
               const VerifyParams& params) {
  const DepthRender r = model.renderer.render(pose, scene.camera());
  const double thresh = params.fit(model.leaf);
  std::size_t measured = 0, fit = 0;
  r.for_each([&](int u, int v, float d) {
    const float s = scene.depth().at(u, v);
    if (s <= 0.0f) return;
    ++measured;
    if (std::abs(double(d) - double(s)) < thresh) ++fit;
  });
  return measured ? double(fit) / double(measured) : 0.0;
}

namespace {

struct Correspondence {
  Vec3 p;  // model point in camera frame
  Vec3 q;  // scene point
  Vec3 n;  // model normal in camera frame
};

Mat3 exp_so3(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-15) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

double icp_rms(const std::vector<Correspondence>& corr, const Mat3& r, const Vec3& t, IcpMetric metric) {
  double sum = 0.0;
  for (const auto& c : corr) {
    const Vec3 d = r * c.p + t - c.q;
    if (metric == IcpMetric::kPointToPlane) {
      const double e = d.dot(c.n);
      sum += e * e;
    } else {
      sum += d.squaredNorm();
    }
  }
  return std::sqrt(sum / corr.size());
}

}  // namespace

IcpResult projective_icp(const PoseHypothesis& h, const SceneView& scene, const ModelView& model,
                         const VerifyParams& params, IcpMetric metric) {
  IcpResult result;
  result.hypothesis = h;
  RigidTransform pose = h.pose;
  const auto& cam = scene.camera();
  const auto& oc = scene.organized();
  const double max_dist = params.reject_dist(model.leaf);
  const double cos_max_angle = std::cos(params.icp_reject_angle);
  constexpr double kMinAngle = 0.01 * std::numbers::pi / 180.0;
  constexpr double kMinTranslation = 0.01;

  std::vector<Correspondence> corr;
  for (int it = 0; it < params.icp_iters; ++it) {
    result.iterations = it + 1;
    corr.clear();
    for (std::size_t i = 0; i < model.points.size(); ++i) {
      const Vec3 p = pose.apply(model.points.point(i));
      if (p.z() <= 0.0) continue;
      const Vec3 n = pose.rotate(model.points.normal(i));
      if (n.dot(p) >= 0.0) continue;  // back-facing
      const Eigen::Vector2d uv = cam.project(p);
      const int u = static_cast<int>(std::lround(uv.x()));
      const int v = static_cast<int>(std::lround(uv.y()));
      if (!cam.contains(u, v) || !oc.has_normal(u, v)) continue;
      const Vec3& q = oc.point(u, v);
      if ((p - q).norm() > max_dist || n.dot(oc.normal(u, v)) < cos_max_angle) continue;
      corr.push_back({p, q, n});
    }
    if (corr.size() < 6) {
      result.low_support = true;
      break;
    }
    // Linearize about the correspondence centroid to keep the rotation
    // lever arm short: x -> R (x - c) + c + t.
    Vec3 center = Vec3::Zero();
    for (const auto& c : corr) center += c.p;
    center /= double(corr.size());
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& c : corr) {
      const Vec3 arm = c.p - center;
      if (metric == IcpMetric::kPointToPlane) {
        Eigen::Matrix<double, 6, 1> j;
        j.head<3>() = arm.cross(c.n);
        j.tail<3>() = c.n;
        a += j * j.transpose();
        b += j * (c.p - c.q).dot(c.n);
      } else {
        // Rows of [-[arm]x | I] for each coordinate.
        Eigen::Matrix<double, 3, 6> j;
        j.leftCols<3>() << 0, arm.z(), -arm.y(), -arm.z(), 0, arm.x(), arm.y(), -arm.x(), 0;
        j.rightCols<3>() = Mat3::Identity();
        a += j.transpose() * j;
        b += j.transpose() * (c.p - c.q);
      }
    }
    const Eigen::Matrix<double, 6, 1> x = -a.ldlt().solve(b);
    if (!x.allFinite()) break;
    const Mat3 dr = exp_so3(x.head<3>());
    const Vec3 dt = center - dr * center + x.tail<3>();
    const double before = icp_rms(corr, Mat3::Identity(), Vec3::Zero(), metric);
    const double after = icp_rms(corr, dr, dt, metric);
    if (after > before) break;
    pose = (RigidTransform(dr, dt) * pose).orthonormalized();
    result.steps.push_back({before, after, corr.size()});
    if (x.head<3>().norm() < kMinAngle && x.tail<3>().norm() < kMinTranslation) break;
  }
  result.hypothesis.pose = pose;
  result.hypothesis.status = HypothesisStatus::kRefined;
  result.hypothesis.low_support = result.low_support;
  return result;
}

ConsistencyStats consistency_stats(const RigidTransform& pose, const SceneView& scene,
                                   const ModelView& model, const VerifyParams& params) {
  const DepthRender r = model.renderer.render(pose, scene.camera());
  ConsistencyStats st;
  r.for_each([&](int u, int v, float d) {
    const float s = scene.depth().at(u, v);
    if (s <= 0.0f) return;
    ++st.measured;
    if (double(d) < double(s) - params.occlusion_margin) {
      ++st.nonconsistent;
    } else if (double(d) > double(s) + params.occlusion_margin) {
      ++st.occluded;
    }
  });
  return st;
}

bool consistency_filter(const RigidTransform& pose, const SceneView& scene, const ModelView& model,
                        const VerifyParams& params) {
  const auto st = consistency_stats(pose, scene, model, params);
  return st.measured > 0 && st.fraction() <= params.nonconsistent_max;
}

EdgeOverlapStats edge_overlap_stats(const RigidTransform& pose, const SceneView& scene,
                                    const ModelView& model) {
  const DepthRender r = model.renderer.render(pose, scene.camera());
  const auto& cam = scene.camera();
  EdgeOverlapStats st;
  r.for_each([&](int u, int v, float) {
    static constexpr int du[] = {1, -1, 0, 0};
    static constexpr int dv[] = {0, 0, 1, -1};
    bool boundary = false;
    for (int k = 0; k < 4 && !boundary; ++k) {
      const int uu = u + du[k], vv = v + dv[k];
      boundary = !cam.contains(uu, vv) || r.at(uu, vv) <= 0.0f;
    }
    if (!boundary) return;
    ++st.silhouette;
    if (scene.edge(u, v)) ++st.on_edge;
  });
  return st;
}

bool edge_overlap_filter(const RigidTransform& pose, const SceneView& scene, const ModelView& model,
                         const VerifyParams& params) {
  const auto st = edge_overlap_stats(pose, scene, model);
  return st.silhouette > 0 && st.rate() >= params.edge_overlap_min;
}

namespace {

void sort_by_score(std::vector<PoseHypothesis>& v) {
  std::stable_sort(v.begin(), v.end(), [](const PoseHypothesis& a, const PoseHypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.votes != b.votes) return a.votes > b.votes;
    return a.scene_ref < b.scene_ref;
  });
}

}  // namespace

VerifyOutcome verify_pipeline(const std::vector<PoseHypothesis>& hyps, const SceneView& scene,
                              const ModelView& model, const VerifyParams& params) {
  params.validate();
  VerifyOutcome out;
  const std::size_t n = std::min<std::size_t>(hyps.size(), params.rescore_top);
  out.ranked.assign(hyps.begin(), hyps.begin() + static_cast<std::ptrdiff_t>(n));

  parallel_for(n, params.workers, [&](int, std::size_t i) {
    auto& h = out.ranked[i];
    h.score = rescore(h.pose, scene, model, params);
    h.status = HypothesisStatus::kRescored;
  });
  sort_by_score(out.ranked);

  const std::size_t n_icp = std::min<std::size_t>(n, params.icp_top);
  parallel_for(n_icp, params.workers, [&](int, std::size_t i) {
    auto refined = projective_icp(out.ranked[i], scene, model, params).hypothesis;
    refined.score = rescore(refined.pose, scene, model, params);
    out.ranked[i] = refined;
  });
  sort_by_score(out.ranked);

  for (auto& h : out.ranked) {
    if (!consistency_filter(h.pose, scene, model, params)) {
      h.status = HypothesisStatus::kRejectedConsistency;
      continue;
    }
    if (!edge_overlap_filter(h.pose, scene, model, params)) {
      h.status = HypothesisStatus::kRejectedEdge;
      continue;
    }
    h.status = HypothesisStatus::kAccepted;
    out.best = h;
    break;
  }
  return out;
}

}  // namespace ppf
