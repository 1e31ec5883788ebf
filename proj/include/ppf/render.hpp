#pragma once

#include <vector>

#include "ppf/camera.hpp"
#include "ppf/mesh.hpp"

namespace ppf {

/// Depth rendered inside a region of interest of the full image; pixels
/// outside the ROI or not covered read as 0. The object mask is depth > 0.
struct DepthRender {
  int x0 = 0, y0 = 0, width = 0, height = 0;
  std::vector<float> depth;

  float at(int u, int v) const {
    const int x = u - x0, y = v - y0;
    if (x < 0 || y < 0 || x >= width || y >= height) return 0.0f;
    return depth[std::size_t(y) * width + x];
  }
  bool empty() const;
  std::size_t mask_count() const;
  DepthImage to_image(int image_width, int image_height) const;

  /// fn(u, v, depth) for every covered pixel, row-major.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const float d = depth[std::size_t(y) * width + x];
        if (d > 0.0f) fn(x + x0, y + y0, d);
      }
    }
  }
};

/// Software z-buffer renderer. Meshes with faces are rasterized with
/// perspective-correct depth; point-only models are drawn as constant-depth
/// discs of radius ceil(fx * splat_leaf / z) pixels. With `splat_erode` > 0
/// the disc mask is then eroded by round(fx * splat_erode / z) pixels, so a
/// splat radius that closes the gaps between samples does not widen the
/// silhouette by as much. Triangles with a vertex at z <= 0 are skipped.
class Renderer {
 public:
  explicit Renderer(Mesh mesh, double splat_leaf = 0.0, double splat_erode = 0.0);

  DepthRender render(const RigidTransform& pose, const CameraIntrinsics& cam) const;
  const Mesh& mesh() const { return mesh_; }

 private:
  Mesh mesh_;
  double splat_leaf_;
  double splat_erode_;
};

/// Convenience: render `mesh` at `pose` into a full-size image.
DepthImage render_depth(const Mesh& mesh, const RigidTransform& pose, const CameraIntrinsics& cam,
                        double splat_leaf = 0.0);

}  // namespace ppf
