#pragma once

// Independent reference implementations used only by the tests.

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "ppf/camera.hpp"
#include "ppf/geometry.hpp"
#include "ppf/model_table.hpp"
#include "ppf/ppf.hpp"
#include "ppf/render.hpp"

namespace ppf::oracle {

/// Feature straight from the definition with clamped std::acos.
std::array<double, 4> feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

/// Bin indices by floor division, clamped to the last bin.
std::array<int, 4> bins(const std::array<double, 4>& f, double d_max, int n_dist, int n_angle);

std::uint32_t pack(const std::array<int, 4>& b, int n_angle);

/// Base key plus every in-range key that differs by at most one bin in each
/// dimension (the 80-neighbor hypercube).
std::set<std::uint32_t> hypercube_keys(const std::array<double, 4>& f, const QuantizationParams& q);

/// O(n^2) maximum distance.
double diameter(const std::vector<Vec3>& pts);

/// Indices within r of c by linear scan.
std::vector<std::uint32_t> radius_scan(const std::vector<Vec3>& pts, const Vec3& c, double r);

/// Vote grid of one scene reference point obtained by scanning every model
/// pair and comparing discretized features directly (no table, no
/// neighbor keys). Scene neighbors are visited in index order and a
/// (key, scene alpha bin) combination only votes the first time.
std::vector<std::uint32_t> brute_force_votes(const ModelTable& table, const OrientedPointCloud& scene,
                                             std::uint32_t ref, int n_alpha_bins);

/// Per-pixel VSD count over the full image with explicit masks.
double vsd(const DepthImage& est, const DepthImage& gt, const DepthImage& scene, double delta, double tau);

}  // namespace ppf::oracle
