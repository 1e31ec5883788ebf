#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <unordered_set>
#include <vector>

#include "ppf/geometry.hpp"
#include "ppf/kdtree.hpp"
#include "ppf/model_table.hpp"

namespace ppf {

struct MatchParams {
  int scene_ref_stride = 5;
  int n_alpha_bins = 30;
  /// mm; unset means 0.1 * model diameter.
  std::optional<double> cluster_trans_thresh;
  double cluster_rot_thresh = 12.0 * std::numbers::pi / 180.0;
  int max_hypotheses_out = 500;
  int workers = 1;

  void validate() const;
  double resolved_trans_thresh(double diameter) const {
    return cluster_trans_thresh.value_or(0.1 * diameter);
  }
};

enum class HypothesisStatus {
  kRaw,
  kClustered,
  kRescored,
  kRefined,
  kRejectedConsistency,
  kRejectedEdge,
  kAccepted,
};

const char* to_string(HypothesisStatus s);

struct PoseHypothesis {
  RigidTransform pose;
  std::int64_t votes = 0;
  double score = 0.0;
  std::uint32_t scene_ref = 0;
  HypothesisStatus status = HypothesisStatus::kRaw;
  bool low_support = false;  ///< set when refinement ran out of correspondences
};

/// Per-reference-point vote grid over (model point, alpha bin). Each cell
/// also sums the offsets of its votes from the bin center so the peak angle
/// can be reported below bin resolution.
class Accumulator {
 public:
  Accumulator(std::size_t model_points, int alpha_bins)
      : model_points_(model_points),
        alpha_bins_(alpha_bins),
        votes_(model_points * alpha_bins, 0),
        offsets_(model_points * alpha_bins, 0.0) {}

  void clear() {
    std::fill(votes_.begin(), votes_.end(), 0u);
    std::fill(offsets_.begin(), offsets_.end(), 0.0);
  }
  void add(std::uint32_t model_index, int alpha_bin, double offset = 0.0) {
    const std::size_t c = std::size_t(model_index) * alpha_bins_ + alpha_bin;
    ++votes_[c];
    offsets_[c] += offset;
  }
  std::uint32_t at(std::uint32_t model_index, int alpha_bin) const {
    return votes_[std::size_t(model_index) * alpha_bins_ + alpha_bin];
  }
  std::size_t model_points() const { return model_points_; }
  int alpha_bins() const { return alpha_bins_; }
  const std::vector<std::uint32_t>& cells() const { return votes_; }

  struct Peak {
    std::uint32_t model_index = 0;
    int alpha_bin = 0;
    std::uint32_t votes = 0;
    double alpha = 0.0;  ///< bin center plus the mean offset of its votes
  };
  /// Maximum cell; ties go to the lowest (model index, alpha bin).
  Peak peak() const;

 private:
  std::size_t model_points_;
  int alpha_bins_;
  std::vector<std::uint32_t> votes_;
  std::vector<double> offsets_;
};

/// Remembers which (feature key, scene alpha bin) pairs already voted for
/// the current reference point.
class DuplicateLog {
 public:
  /// True the first time a pair is seen since the last clear().
  bool allow(std::uint32_t packed_key, int alpha_bin) {
    return seen_.insert((static_cast<std::uint64_t>(packed_key) << 16) |
                        static_cast<std::uint16_t>(alpha_bin))
        .second;
  }
  void clear() { seen_.clear(); }

 private:
  std::unordered_set<std::uint64_t> seen_;
};

/// Alpha bin of an angle. Bin b is centered on b * 2pi / bins, so bin 0
/// covers [-pi / bins, pi / bins) and a zero difference never sits on an
/// edge.
int alpha_bin(double angle, int bins);
/// Angle wrapped into [-pi, pi).
double wrap_angle(double angle);
/// Center angle of an alpha bin.
double alpha_bin_center(int bin, int bins);

/// Scene-side matching state shared by all reference points.
class SceneMatcher {
 public:
  SceneMatcher(const ModelTable& table, const OrientedPointCloud& scene);

  /// Fills `acc` with the votes of scene point `ref` (acc and log are
  /// cleared first).
  void vote(std::uint32_t ref, const MatchParams& params, Accumulator& acc, DuplicateLog& log,
            std::vector<std::uint32_t>& scratch) const;

  /// Votes for `ref` and turns the accumulator peak into a hypothesis;
  /// nullopt when nothing voted.
  std::optional<PoseHypothesis> hypothesis(std::uint32_t ref, const MatchParams& params,
                                           Accumulator& acc, DuplicateLog& log,
                                           std::vector<std::uint32_t>& scratch) const;

  const KdTree& index() const { return index_; }

 private:
  const ModelTable& table_;
  const OrientedPointCloud& scene_;
  KdTree index_;
};

/// One hypothesis per scene reference point (every stride-th point), sorted
/// by votes descending then scene_ref ascending. The result does not depend
/// on params.workers.
std::vector<PoseHypothesis> match_scene(const ModelTable& table, const OrientedPointCloud& scene,
                                        const MatchParams& params);

/// Quaternion of a rotation matrix, w >= 0.
Eigen::Quaterniond to_quaternion(const Mat3& r);

/// Greedy pose clustering of vote-sorted hypotheses. Each joins the first
/// cluster whose seed is within the translation and rotation thresholds;
/// cluster poses are vote-weighted means (quaternions aligned to the seed's
/// hemisphere). Output sorted by summed votes, truncated to
/// max_hypotheses_out.
std::vector<PoseHypothesis> cluster_hypotheses(std::vector<PoseHypothesis> hyps,
                                               const MatchParams& params, double diameter);

}  // namespace ppf
