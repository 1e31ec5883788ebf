#include "ppf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ppf {

void SubsampleParams::validate() const {
  if (!(leaf > 0.0)) throw std::invalid_argument("SubsampleParams: leaf must be positive");
  if (!(normal_cluster_angle > 0.0) || normal_cluster_angle > std::numbers::pi) {
    throw std::invalid_argument("SubsampleParams: normal_cluster_angle must be in (0, pi]");
  }
}

namespace {

using Cell = std::array<std::int32_t, 3>;

struct Cluster {
  std::vector<std::uint32_t> members;
  Vec3 normal_sum = Vec3::Zero();
};

Vec3 unit_or(const Vec3& v, const Vec3& fallback) {
  const double n = v.norm();
  return n > 1e-12 ? Vec3(v / n) : fallback;
}

// Greedy clustering of one voxel's points (given in processing order).
std::vector<Cluster> cluster_normals(const OrientedPointCloud& cloud,
                                     const std::vector<std::uint32_t>& pts, double max_angle) {
  std::vector<Cluster> clusters;
  if (max_angle >= std::numbers::pi) {
    Cluster all;
    for (auto i : pts) {
      all.members.push_back(i);
      all.normal_sum += cloud.normal(i);
    }
    clusters.push_back(std::move(all));
    return clusters;
  }
  for (auto i : pts) {
    const Vec3& n = cloud.normal(i);
    bool placed = false;
    for (auto& c : clusters) {
      if (angle_between(c.normal_sum, n) < max_angle) {
        c.members.push_back(i);
        c.normal_sum += n;
        placed = true;
        break;
      }
    }
    if (!placed) clusters.push_back({{i}, n});
  }
  // Split off members that drifted out of range of the final mean. A
  // singleton cluster is always valid, so this terminates.
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<Cluster> split;
    for (auto& c : clusters) {
      if (c.members.size() < 2) continue;
      std::vector<std::uint32_t> keep, out;
      for (auto m : c.members) {
        (angle_between(c.normal_sum, cloud.normal(m)) < max_angle ? keep : out).push_back(m);
      }
      if (out.empty()) continue;
      if (keep.empty()) {
        // The mean cancelled out entirely; the seed stays.
        keep.push_back(out.front());
        out.erase(out.begin());
      }
      changed = true;
      for (auto m : out) split.push_back({{m}, cloud.normal(m)});
      c.members = std::move(keep);
      c.normal_sum = Vec3::Zero();
      for (auto m : c.members) c.normal_sum += cloud.normal(m);
    }
    for (auto& s : split) clusters.push_back(std::move(s));
  }
  return clusters;
}

}  // namespace

ClusteredCloud subsample(const OrientedPointCloud& cloud, const SubsampleParams& params,
                         std::vector<std::uint32_t>* source_cluster) {
  params.validate();
  if (cloud.empty()) throw std::invalid_argument("subsample: empty cloud");

  Vec3 lo = cloud.point(0);
  for (const auto& p : cloud.points()) lo = lo.cwiseMin(p);

  std::vector<Cell> cells(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 q = (cloud.point(i) - lo) / params.leaf;
    cells[i] = {static_cast<std::int32_t>(std::floor(q.x())),
                static_cast<std::int32_t>(std::floor(q.y())),
                static_cast<std::int32_t>(std::floor(q.z()))};
  }
  std::vector<std::uint32_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return cells[a] < cells[b]; });

  Cell extent{0, 0, 0};
  for (const auto& c : cells) {
    for (int k = 0; k < 3; ++k) extent[k] = std::max(extent[k], c[k] + 1);
  }

  ClusteredCloud out;
  std::vector<Vec3> pts, nrm;
  if (source_cluster) source_cluster->assign(cloud.size(), 0);

  std::size_t begin = 0;
  std::vector<std::uint32_t> voxel;
  while (begin < order.size()) {
    std::size_t end = begin;
    voxel.clear();
    while (end < order.size() && cells[order[end]] == cells[order[begin]]) {
      voxel.push_back(order[end]);
      ++end;
    }
    const Cell& c = cells[order[begin]];
    const std::int64_t cell_linear =
        c[0] + static_cast<std::int64_t>(extent[0]) *
                   (c[1] + static_cast<std::int64_t>(extent[1]) * c[2]);
    for (const auto& cluster : cluster_normals(cloud, voxel, params.normal_cluster_angle)) {
      Vec3 centroid = Vec3::Zero();
      for (auto m : cluster.members) centroid += cloud.point(m);
      centroid /= static_cast<double>(cluster.members.size());
      const auto rep = static_cast<std::uint32_t>(pts.size());
      pts.push_back(centroid);
      nrm.push_back(unit_or(cluster.normal_sum, cloud.normal(cluster.members.front())));
      out.cell_id.push_back(cell_linear);
      out.cluster_id.push_back(rep);
      out.weight.push_back(static_cast<std::uint32_t>(cluster.members.size()));
      out.raw_mean_normal.push_back(cluster.normal_sum /
                                    static_cast<double>(cluster.members.size()));
      out.cell.push_back(c);
      if (source_cluster) {
        for (auto m : cluster.members) (*source_cluster)[m] = rep;
      }
    }
    begin = end;
  }
  out.cloud = OrientedPointCloud(std::move(pts), std::move(nrm));
  return out;
}

OrientedPointCloud filter_neighbor_pairs(const ClusteredCloud& cc, const SubsampleParams& params) {
  params.validate();
  const std::size_t n = cc.cloud.size();
  std::map<Cell, std::vector<std::uint32_t>> by_cell;
  for (std::uint32_t i = 0; i < n; ++i) by_cell[cc.cell[i]].push_back(i);

  std::vector<bool> absorbed(n, false);
  std::vector<Vec3> pts, nrm;
  std::vector<std::uint32_t> candidates;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (absorbed[i]) continue;
    double w = cc.weight[i];
    Vec3 pos_sum = cc.cloud.point(i) * w;
    Vec3 normal_sum = cc.cloud.normal(i) * w;

    candidates.clear();
    const Cell& c = cc.cell[i];
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          auto it = by_cell.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == by_cell.end()) continue;
          for (auto j : it->second) {
            if (j > i && !absorbed[j]) candidates.push_back(j);
          }
        }
      }
    }
    std::sort(candidates.begin(), candidates.end());
    for (auto j : candidates) {
      const Vec3 pos = pos_sum / w;
      if (angle_between(normal_sum, cc.cloud.normal(j)) < params.normal_cluster_angle &&
          (pos - cc.cloud.point(j)).norm() < params.leaf) {
        absorbed[j] = true;
        pos_sum += cc.cloud.point(j) * cc.weight[j];
        normal_sum += cc.cloud.normal(j) * cc.weight[j];
        w += cc.weight[j];
      }
    }
    pts.push_back(pos_sum / w);
    nrm.push_back(unit_or(normal_sum, cc.cloud.normal(i)));
  }
  return {std::move(pts), std::move(nrm)};
}

OrientedPointCloud preprocess_cloud(const OrientedPointCloud& cloud, const SubsampleParams& params) {
  ClusteredCloud cc = subsample(cloud, params);
  if (!params.merge_neighbor_clusters) return cc.cloud;
  return filter_neighbor_pairs(cc, params);
}

}  // namespace ppf
