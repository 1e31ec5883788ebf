#include "ppf/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppf {

bool DepthRender::empty() const {
  return std::none_of(depth.begin(), depth.end(), [](float d) { return d > 0.0f; });
}

std::size_t DepthRender::mask_count() const {
  return static_cast<std::size_t>(
      std::count_if(depth.begin(), depth.end(), [](float d) { return d > 0.0f; }));
}

DepthImage DepthRender::to_image(int image_width, int image_height) const {
  DepthImage img(image_width, image_height);
  for_each([&](int u, int v, float d) {
    if (u < image_width && v < image_height) img.at(u, v) = d;
  });
  return img;
}

Renderer::Renderer(Mesh mesh, double splat_leaf, double splat_erode)
    : mesh_(std::move(mesh)), splat_leaf_(splat_leaf), splat_erode_(splat_erode) {
  if (!mesh_.has_faces() && !(splat_leaf_ > 0.0)) {
    throw std::invalid_argument("Renderer: point-only models need a positive splat size");
  }
  if (!(splat_erode_ >= 0.0) || (!mesh_.has_faces() && splat_erode_ >= splat_leaf_)) {
    throw std::invalid_argument("Renderer: splat erosion must be in [0, splat size)");
  }
}

namespace {

inline double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

// Clears every covered pixel whose disc of radius round(k / depth) is not
// fully covered.
void erode(DepthRender& out, double k) {
  const std::vector<float> src = out.depth;
  auto covered = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < out.width && y < out.height && src[std::size_t(y) * out.width + x] > 0.0f;
  };
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const float d = src[std::size_t(y) * out.width + x];
      if (d <= 0.0f) continue;
      const int e = static_cast<int>(std::lround(k / d));
      bool keep = true;
      for (int dy = -e; dy <= e && keep; ++dy) {
        for (int dx = -e; dx <= e; ++dx) {
          if (dx * dx + dy * dy <= e * e && !covered(x + dx, y + dy)) {
            keep = false;
            break;
          }
        }
      }
      if (!keep) out.depth[std::size_t(y) * out.width + x] = 0.0f;
    }
  }
}

}  // namespace

DepthRender Renderer::render(const RigidTransform& pose, const CameraIntrinsics& cam) const {
  DepthRender out;
  const std::size_t nv = mesh_.vertices.size();
  std::vector<Vec3> cam_pts(nv);
  std::vector<Eigen::Vector2d> screen(nv);
  double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
  const bool splat = !mesh_.has_faces();
  for (std::size_t i = 0; i < nv; ++i) {
    cam_pts[i] = pose.apply(mesh_.vertices[i]);
    if (cam_pts[i].z() <= 0.0) continue;
    screen[i] = cam.project(cam_pts[i]);
    const double r = splat ? std::ceil(cam.fx * splat_leaf_ / cam_pts[i].z()) : 0.0;
    umin = std::min(umin, screen[i].x() - r);
    umax = std::max(umax, screen[i].x() + r);
    vmin = std::min(vmin, screen[i].y() - r);
    vmax = std::max(vmax, screen[i].y() + r);
  }
  if (umin > umax) return out;
  const int x0 = std::max(0, static_cast<int>(std::floor(umin)));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(umax)));
  const int y0 = std::max(0, static_cast<int>(std::floor(vmin)));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(vmax)));
  if (x0 > x1 || y0 > y1) return out;
  out.x0 = x0;
  out.y0 = y0;
  out.width = x1 - x0 + 1;
  out.height = y1 - y0 + 1;
  out.depth.assign(std::size_t(out.width) * out.height, 0.0f);

  auto write = [&](int u, int v, double z) {
    float& cell = out.depth[std::size_t(v - y0) * out.width + (u - x0)];
    const auto zf = static_cast<float>(z);
    if (cell == 0.0f || zf < cell) cell = zf;
  };

  if (splat) {
    for (std::size_t i = 0; i < nv; ++i) {
      const double z = cam_pts[i].z();
      if (z <= 0.0) continue;
      const int r = static_cast<int>(std::ceil(cam.fx * splat_leaf_ / z));
      const int cu = static_cast<int>(std::lround(screen[i].x()));
      const int cv = static_cast<int>(std::lround(screen[i].y()));
      for (int v = std::max(cv - r, y0); v <= std::min(cv + r, y1); ++v) {
        for (int u = std::max(cu - r, x0); u <= std::min(cu + r, x1); ++u) {
          if ((u - cu) * (u - cu) + (v - cv) * (v - cv) <= r * r) write(u, v, z);
        }
      }
    }
    if (splat_erode_ > 0.0) erode(out, cam.fx * splat_erode_);
    return out;
  }

  for (const auto& f : mesh_.faces) {
    const Vec3& pa = cam_pts[f[0]];
    const Vec3& pb = cam_pts[f[1]];
    const Vec3& pc = cam_pts[f[2]];
    if (pa.z() <= 0.0 || pb.z() <= 0.0 || pc.z() <= 0.0) continue;
    const auto& a = screen[f[0]];
    const auto& b = screen[f[1]];
    const auto& c = screen[f[2]];
    double area = edge(a, b, c.x(), c.y());
    if (std::abs(area) < 1e-12) continue;
    const double sign = area > 0.0 ? 1.0 : -1.0;
    area *= sign;
    const int bu0 = std::max(x0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
    const int bu1 = std::min(x1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
    const int bv0 = std::max(y0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
    const int bv1 = std::min(y1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
    const double iza = 1.0 / pa.z(), izb = 1.0 / pb.z(), izc = 1.0 / pc.z();
    for (int v = bv0; v <= bv1; ++v) {
      for (int u = bu0; u <= bu1; ++u) {
        const double w0 = sign * edge(b, c, u, v);
        const double w1 = sign * edge(c, a, u, v);
        const double w2 = sign * edge(a, b, u, v);
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double inv_z = (w0 * iza + w1 * izb + w2 * izc) / area;
        write(u, v, 1.0 / inv_z);
      }
    }
  }
  return out;
}

DepthImage render_depth(const Mesh& mesh, const RigidTransform& pose, const CameraIntrinsics& cam,
                        double splat_leaf) {
  return Renderer(mesh, splat_leaf).render(pose, cam).to_image(cam.width, cam.height);
}

}  // namespace ppf
