#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ppf/geometry.hpp"

namespace ppf {

struct SubsampleParams {
  double leaf = 1.0;                                     ///< voxel edge, mm
  double normal_cluster_angle = std::numbers::pi / 6.0;  ///< radians
  bool merge_neighbor_clusters = true;

  /// Throws std::invalid_argument on leaf <= 0 or angle outside (0, pi].
  /// pi is accepted and degenerates to plain voxel-centroid subsampling.
  void validate() const;
};

/// Output of the voxel + normal clustering step. One point per
/// (voxel, normal cluster).
struct ClusteredCloud {
  OrientedPointCloud cloud;
  std::vector<std::int64_t> cell_id;
  std::vector<std::int64_t> cluster_id;
  std::vector<std::uint32_t> weight;            ///< member count
  std::vector<Vec3> raw_mean_normal;            ///< before renormalization
  std::vector<std::array<std::int32_t, 3>> cell;  ///< voxel coordinates
};

/// Voxelizes with edge `leaf` (grid anchored at the cloud's min corner) and
/// greedily clusters normals inside each voxel: a point joins the first
/// cluster whose running mean is within `normal_cluster_angle`, otherwise it
/// seeds a new cluster. Members that end up outside the angle from their
/// cluster's final mean are split off into singleton clusters. Each cluster
/// is represented by its centroid and renormalized mean normal.
///
/// `source_cluster` (optional) receives, per input point, the index of the
/// representative it was assigned to.
ClusteredCloud subsample(const OrientedPointCloud& cloud, const SubsampleParams& params,
                         std::vector<std::uint32_t>* source_cluster = nullptr);

/// Merges near-duplicate representatives of the same or 26-adjacent voxels:
/// a pair is merged when its normals are closer than `normal_cluster_angle`
/// and its points closer than `leaf`. Merged points take the weight-averaged
/// position and renormalized weight-averaged normal.
OrientedPointCloud filter_neighbor_pairs(const ClusteredCloud& cc, const SubsampleParams& params);

/// subsample followed by filter_neighbor_pairs when enabled.
OrientedPointCloud preprocess_cloud(const OrientedPointCloud& cloud, const SubsampleParams& params);

}  // namespace ppf
