#include "ppf/camera.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppf {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera: fx and fy must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: empty image size");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("camera: principal point outside the image");
  }
}

std::size_t DepthImage::measured_count() const {
  return static_cast<std::size_t>(
      std::count_if(depth_.begin(), depth_.end(), [](float d) { return d > 0.0f; }));
}

OrganizedCloud organize(const DepthImage& depth, const CameraIntrinsics& cam, double radius_mm) {
  OrganizedCloud oc;
  oc.width = depth.width();
  oc.height = depth.height();
  const std::size_t n = std::size_t(oc.width) * oc.height;
  oc.points.assign(n, Vec3::Zero());
  oc.normals.assign(n, Vec3::Zero());
  oc.valid.assign(n, 0);
  for (int v = 0; v < oc.height; ++v) {
    for (int u = 0; u < oc.width; ++u) {
      const float d = depth.at(u, v);
      if (d > 0.0f) oc.points[std::size_t(v) * oc.width + u] = cam.back_project(u, v, d);
    }
  }
  const double r2 = radius_mm * radius_mm;
  std::vector<Vec3> hood;
  for (int v = 0; v < oc.height; ++v) {
    for (int u = 0; u < oc.width; ++u) {
      const float d = depth.at(u, v);
      if (d <= 0.0f) continue;
      const Vec3& c = oc.point(u, v);
      const int r = std::clamp(static_cast<int>(std::lround(cam.fx * radius_mm / d)), 1, 16);
      const int step = std::max(1, r / 4);
      hood.clear();
      for (int dv = -r; dv <= r; dv += step) {
        const int vv = v + dv;
        if (vv < 0 || vv >= oc.height) continue;
        for (int du = -r; du <= r; du += step) {
          const int uu = u + du;
          if (uu < 0 || uu >= oc.width || depth.at(uu, vv) <= 0.0f) continue;
          const Vec3& p = oc.point(uu, vv);
          if ((p - c).squaredNorm() <= r2) hood.push_back(p);
        }
      }
      if (hood.size() < 5) continue;
      Vec3 normal;
      if (!pca_normal(hood, normal)) continue;
      if (normal.dot(-c) < 0.0) normal = -normal;
      const std::size_t idx = std::size_t(v) * oc.width + u;
      oc.normals[idx] = normal;
      oc.valid[idx] = 1;
    }
  }
  return oc;
}

OrientedPointCloud to_point_cloud(const OrganizedCloud& oc) {
  std::vector<Vec3> pts, nrm;
  for (std::size_t i = 0; i < oc.valid.size(); ++i) {
    if (!oc.valid[i]) continue;
    pts.push_back(oc.points[i]);
    nrm.push_back(oc.normals[i]);
  }
  return {std::move(pts), std::move(nrm)};
}

}  // namespace ppf
