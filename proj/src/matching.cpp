#include "ppf/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppf/parallel.hpp"

namespace ppf {

void MatchParams::validate() const {
  if (scene_ref_stride < 1) throw std::invalid_argument("MatchParams: scene_ref_stride < 1");
  if (n_alpha_bins < 2) throw std::invalid_argument("MatchParams: n_alpha_bins < 2");
  if (cluster_trans_thresh && !(*cluster_trans_thresh > 0.0)) {
    throw std::invalid_argument("MatchParams: cluster_trans_thresh must be positive");
  }
  if (!(cluster_rot_thresh > 0.0)) {
    throw std::invalid_argument("MatchParams: cluster_rot_thresh must be positive");
  }
  if (max_hypotheses_out < 1) throw std::invalid_argument("MatchParams: max_hypotheses_out < 1");
  if (workers < 1) throw std::invalid_argument("MatchParams: workers < 1");
}

const char* to_string(HypothesisStatus s) {
  switch (s) {
    case HypothesisStatus::kRaw: return "raw";
    case HypothesisStatus::kClustered: return "clustered";
    case HypothesisStatus::kRescored: return "rescored";
    case HypothesisStatus::kRefined: return "refined";
    case HypothesisStatus::kRejectedConsistency: return "rejected_consistency";
    case HypothesisStatus::kRejectedEdge: return "rejected_edge";
    case HypothesisStatus::kAccepted: return "accepted";
  }
  return "unknown";
}

Accumulator::Peak Accumulator::peak() const {
  Peak best;
  for (std::size_t c = 0; c < votes_.size(); ++c) {
    if (votes_[c] > best.votes) {
      best.votes = votes_[c];
      best.model_index = static_cast<std::uint32_t>(c / alpha_bins_);
      best.alpha_bin = static_cast<int>(c % alpha_bins_);
    }
  }
  if (best.votes > 0) {
    const std::size_t c = std::size_t(best.model_index) * alpha_bins_ + best.alpha_bin;
    best.alpha = alpha_bin_center(best.alpha_bin, alpha_bins_) + offsets_[c] / best.votes;
  }
  return best;
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return angle - two_pi * std::floor((angle + std::numbers::pi) / two_pi);
}

int alpha_bin(double angle, int bins) {
  const double width = 2.0 * std::numbers::pi / bins;
  const auto b = static_cast<int>(std::floor(wrap_angle(angle) / width + 0.5));
  return ((b % bins) + bins) % bins;
}

double alpha_bin_center(int bin, int bins) {
  return wrap_angle(bin * 2.0 * std::numbers::pi / bins);
}

SceneMatcher::SceneMatcher(const ModelTable& table, const OrientedPointCloud& scene)
    : table_(table), scene_(scene), index_(scene.points()) {}

void SceneMatcher::vote(std::uint32_t ref, const MatchParams& params, Accumulator& acc,
                        DuplicateLog& log, std::vector<std::uint32_t>& scratch) const {
  acc.clear();
  log.clear();
  const QuantizationParams& q = table_.quant();
  const Vec3& sr = scene_.point(ref);
  const Vec3& nr = scene_.normal(ref);
  const RigidTransform frame = intermediate_frame(sr, nr);
  // The kd-tree compares squared distances; the slack keeps pairs at exactly
  // d_max, which the table stores, and the distance check below decides.
  index_.radius_query(sr, q.d_max * (1.0 + 1e-9), scratch);
  for (const auto i : scratch) {
    if (i == ref) continue;
    const auto f = try_compute_ppf(sr, nr, scene_.point(i), scene_.normal(i));
    if (!f || f->dist > q.d_max) continue;
    const double alpha_s = alpha_angle(frame, scene_.point(i));
    const int s_bin = alpha_bin(alpha_s, params.n_alpha_bins);
    for (const auto key : neighbor_keys(*f, q)) {
      if (!log.allow(key, s_bin)) continue;
      for (const auto& e : table_.lookup(key)) {
        const double diff = wrap_angle(static_cast<double>(e.alpha) - alpha_s);
        const int b = alpha_bin(diff, params.n_alpha_bins);
        acc.add(e.ref, b, wrap_angle(diff - alpha_bin_center(b, params.n_alpha_bins)));
      }
    }
  }
}

std::optional<PoseHypothesis> SceneMatcher::hypothesis(std::uint32_t ref,
                                                       const MatchParams& params,
                                                       Accumulator& acc, DuplicateLog& log,
                                                       std::vector<std::uint32_t>& scratch) const {
  vote(ref, params, acc, log, scratch);
  const auto peak = acc.peak();
  if (peak.votes == 0) return std::nullopt;
  PoseHypothesis h;
  h.pose = pose_from_alignment(intermediate_frame(scene_.point(ref), scene_.normal(ref)),
                               table_.frames()[peak.model_index],
                               peak.alpha);
  h.votes = peak.votes;
  h.scene_ref = ref;
  h.status = HypothesisStatus::kRaw;
  return h;
}

std::vector<PoseHypothesis> match_scene(const ModelTable& table, const OrientedPointCloud& scene,
                                        const MatchParams& params) {
  params.validate();
  if (scene.empty()) return {};
  const SceneMatcher matcher(table, scene);
  const std::size_t n_refs = (scene.size() + params.scene_ref_stride - 1) / params.scene_ref_stride;
  std::vector<std::optional<PoseHypothesis>> slots(n_refs);

  const int workers = std::max(1, std::min<int>(params.workers, static_cast<int>(n_refs)));
  struct Scratch {
    Accumulator acc;
    DuplicateLog log;
    std::vector<std::uint32_t> neighbors;
  };
  std::vector<Scratch> scratch;
  scratch.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    scratch.push_back({Accumulator(table.model().size(), params.n_alpha_bins), {}, {}});
  }
  parallel_for(n_refs, workers, [&](int w, std::size_t k) {
    auto& s = scratch[w];
    const auto ref = static_cast<std::uint32_t>(k * params.scene_ref_stride);
    slots[k] = matcher.hypothesis(ref, params, s.acc, s.log, s.neighbors);
  });

  std::vector<PoseHypothesis> out;
  for (auto& s : slots) {
    if (s) out.push_back(*s);
  }
  std::stable_sort(out.begin(), out.end(), [](const PoseHypothesis& a, const PoseHypothesis& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    return a.scene_ref < b.scene_ref;
  });
  return out;
}

Eigen::Quaterniond to_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

std::vector<PoseHypothesis> cluster_hypotheses(std::vector<PoseHypothesis> hyps,
                                               const MatchParams& params, double diameter) {
  params.validate();
  std::stable_sort(hyps.begin(), hyps.end(), [](const PoseHypothesis& a, const PoseHypothesis& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    return a.scene_ref < b.scene_ref;
  });
  const double trans_thresh = params.resolved_trans_thresh(diameter);

  struct Cluster {
    const PoseHypothesis* seed;
    Eigen::Quaterniond seed_q;
    double weight = 0.0;
    std::int64_t votes = 0;
    Vec3 t_sum = Vec3::Zero();
    Eigen::Vector4d q_sum = Eigen::Vector4d::Zero();
  };
  std::vector<Cluster> clusters;
  for (const auto& h : hyps) {
    const Eigen::Quaterniond q = to_quaternion(h.pose.rotation());
    Cluster* home = nullptr;
    for (auto& c : clusters) {
      if ((c.seed->pose.translation() - h.pose.translation()).norm() <= trans_thresh &&
          rotation_distance(c.seed->pose.rotation(), h.pose.rotation()) <= params.cluster_rot_thresh) {
        home = &c;
        break;
      }
    }
    if (!home) {
      clusters.push_back({&h, q});
      home = &clusters.back();
    }
    // Zero-vote members still count once so the mean is defined.
    const double w = h.votes > 0 ? static_cast<double>(h.votes) : 1e-9;
    Eigen::Vector4d qc = q.coeffs();
    if (qc.dot(home->seed_q.coeffs()) < 0.0) qc = -qc;
    home->q_sum += w * qc;
    home->t_sum += w * h.pose.translation();
    home->weight += w;
    home->votes += h.votes;
  }

  std::vector<PoseHypothesis> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    Eigen::Quaterniond q;
    q.coeffs() = c.q_sum.normalized();
    PoseHypothesis h;
    h.pose = RigidTransform(q.toRotationMatrix(), c.t_sum / c.weight);
    h.votes = c.votes;
    h.scene_ref = c.seed->scene_ref;
    h.status = HypothesisStatus::kClustered;
    out.push_back(h);
  }
  std::stable_sort(out.begin(), out.end(), [](const PoseHypothesis& a, const PoseHypothesis& b) {
    return a.votes > b.votes;
  });
  if (out.size() > static_cast<std::size_t>(params.max_hypotheses_out)) {
    out.resize(params.max_hypotheses_out);
  }
  return out;
}

}  // namespace ppf
