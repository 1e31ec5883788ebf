#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "ppf/camera.hpp"
#include "ppf/mesh.hpp"
#include "ppf/render.hpp"

namespace ppf {
namespace {

CameraIntrinsics square_camera() { return {500, 500, 320, 320, 640, 480}; }

Mesh single_vertex() {
  Mesh m;
  m.vertices = {Vec3::Zero()};
  m.normals = {-Vec3::UnitZ()};
  return m;
}

TEST(Render, SingleVertexOnAxis) {
  const auto img = render_depth(single_vertex(), RigidTransform::translation_only(Vec3(0, 0, 1000)),
                                square_camera(), 1e-3);
  EXPECT_FLOAT_EQ(img.at(320, 320), 1000.0f);
  // Splat radius ceil(500 * 1e-3 / 1000) = 1 px: the 4-neighborhood only.
  EXPECT_EQ(img.measured_count(), 5u);
  EXPECT_EQ(img.at(321, 321), 0.0f);
}

TEST(Render, VertexBehindCameraNotDrawn) {
  for (double z : {0.0, -500.0}) {
    const Renderer r(single_vertex(), 1.0);
    const auto out = r.render(RigidTransform::translation_only(Vec3(0, 0, z)), square_camera());
    EXPECT_TRUE(out.empty());
    EXPECT_EQ(out.mask_count(), 0u);
    EXPECT_EQ(out.to_image(640, 480).measured_count(), 0u);
  }
}

TEST(Render, PointPreconditions) {
  EXPECT_THROW(Renderer(single_vertex(), 0.0), std::invalid_argument);
}

TEST(Render, SplatErosionShrinksDisc) {
  // Disc of radius 10 px eroded by 5 px, against a lattice brute force.
  const auto out = Renderer(single_vertex(), 20.0, 10.0)
                       .render(RigidTransform::translation_only(Vec3(0, 0, 1000)), square_camera());
  auto in_disc = [](int du, int dv, int r) { return du * du + dv * dv <= r * r; };
  std::size_t expected = 0;
  for (int dv = -10; dv <= 10; ++dv) {
    for (int du = -10; du <= 10; ++du) {
      if (!in_disc(du, dv, 10)) continue;
      bool inside = true;
      for (int ev = -5; ev <= 5; ++ev) {
        for (int eu = -5; eu <= 5; ++eu) {
          if (in_disc(eu, ev, 5) && !in_disc(du + eu, dv + ev, 10)) inside = false;
        }
      }
      const bool covered = out.at(320 + du, 320 + dv) > 0.0f;
      EXPECT_EQ(covered, inside) << du << "," << dv;
      expected += inside;
    }
  }
  EXPECT_EQ(out.mask_count(), expected);
  EXPECT_THROW(Renderer(single_vertex(), 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Renderer(single_vertex(), 1.0, -0.1), std::invalid_argument);
}

TEST(Render, CubeFrontFaceDepth) {
  const Mesh cube = make_box(Vec3(100, 100, 100), 2);
  const auto cam = testing::test_camera();
  const auto img = render_depth(cube, RigidTransform::translation_only(Vec3(0, 0, 1050)), cam);
  ASSERT_GT(img.measured_count(), 0u);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (img.valid(u, v)) {
        EXPECT_NEAR(img.at(u, v), 1000.0, 0.5) << u << "," << v;
      }
    }
  }
  // Face spans +-50 mm at 1000 mm: about 28.6 px on each side of the center.
  EXPECT_TRUE(img.valid(320 + 27, 240 - 27));
  EXPECT_FALSE(img.valid(320 + 30, 240));
}

TEST(Render, TiltedPlaneMatchesRayIntersection) {
  std::mt19937_64 rng(51);
  const auto cam = testing::test_camera();
  const Mesh slab = make_box(Vec3(200, 200, 1), 4);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat3 r = Eigen::AngleAxisd(0.6, testing::random_unit(rng)).toRotationMatrix();
    const RigidTransform pose(r, Vec3(0, 0, 900));
    const auto img = render_depth(slab, pose, cam);
    // The near face is one of the two large faces; test interior pixels
    // against both planes and take the closer intersection.
    const Vec3 n = r.col(2);
    int checked = 0;
    for (int v = 0; v < img.height(); v += 3) {
      for (int u = 0; u < img.width(); u += 3) {
        if (!img.valid(u, v)) continue;
        const Vec3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
        double best = 1e300;
        bool interior = true;
        for (double s : {-0.5, 0.5}) {
          const Vec3 c = pose.apply(Vec3(0, 0, s));
          const double z = n.dot(c) / n.dot(ray);
          const Vec3 local = r.transpose() * (z * ray - pose.translation());
          interior = interior && z > 0 && local.head<2>().cwiseAbs().maxCoeff() <= 98.0;
          best = std::min(best, z);
        }
        if (!interior) continue;  // near the border or on a side face
        EXPECT_NEAR(img.at(u, v), best, 0.5);
        ++checked;
      }
    }
    EXPECT_GT(checked, 100);
  }
}

TEST(Render, NearestSurfaceWins) {
  Mesh scene = make_box(Vec3(100, 100, 100), 1);
  const auto far = transform_mesh(scene, RigidTransform::translation_only(Vec3(0, 0, 1500)));
  const auto near = transform_mesh(make_box(Vec3(40, 40, 40), 1), RigidTransform::translation_only(Vec3(0, 0, 800)));
  Mesh both = far;
  append_mesh(both, near);
  const auto img = render_depth(both, RigidTransform::identity(), testing::test_camera());
  EXPECT_NEAR(img.at(320, 240), 780.0, 0.5);
  // Near box ends about 14.7 px from the center, the far one at 19.7 px.
  EXPECT_NEAR(img.at(320 + 17, 240), 1450.0, 0.5);
}

TEST(Render, BackProjectionRoundTrip) {
  // Vertices rendered as one-pixel splats: back-projecting the pixel at its
  // depth returns the vertex within half a pixel.
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> xy(-150, 150), z(500, 1500);
  const auto cam = testing::test_camera();
  for (int i = 0; i < 200; ++i) {
    Mesh m = single_vertex();
    const Vec3 p(xy(rng), xy(rng), z(rng));
    const auto out = Renderer(m, 1e-4).render(RigidTransform::translation_only(p), cam);
    int hits = 0;
    out.for_each([&](int u, int v, float d) {
      ++hits;
      const Vec3 q = cam.back_project(u, v, d);
      EXPECT_NEAR(q.z(), p.z(), 0.1);
      const auto px = cam.project(p);
      EXPECT_LE(std::abs(px.x() - u), 1.5);
      EXPECT_LE(std::abs(px.y() - v), 1.5);
      if (u == std::lround(px.x()) && v == std::lround(px.y())) {
        EXPECT_LE((cam.project(q) - px).cwiseAbs().maxCoeff(), 0.5 + 1e-9);
      }
    });
    EXPECT_GE(hits, 1);
  }
}

TEST(Organize, PlaneNormalsFaceCamera) {
  const auto cam = testing::test_camera();
  const Mat3 tilt = Eigen::AngleAxisd(0.4, Vec3::UnitX()).toRotationMatrix();
  const auto img = render_depth(make_box(Vec3(400, 400, 2), 8), RigidTransform(tilt, Vec3(0, 0, 800)), cam);
  const auto oc = organize(img, cam, 15.0);
  const Vec3 expected = -(tilt.col(2));  // front face normal points at the camera
  int with_normal = 0;
  // Central region only: windows at the slab border see its side faces.
  for (int v = 140; v < 340; v += 5) {
    for (int u = 220; u < 420; u += 5) {
      if (!oc.has_normal(u, v)) continue;
      ++with_normal;
      EXPECT_LT(angle_between(oc.normal(u, v), expected), 0.02) << u << "," << v;
      EXPECT_LE(oc.normal(u, v).dot(oc.point(u, v)), 0.0);
    }
  }
  EXPECT_GT(with_normal, 500);
  const auto cloud = to_point_cloud(oc);
  std::size_t valid = 0;
  for (auto f : oc.valid) valid += f;
  EXPECT_EQ(cloud.size(), valid);
}

TEST(Organize, MissingPixelsHaveNoNormal) {
  DepthImage img(20, 10);
  const CameraIntrinsics cam{100, 100, 10, 5, 20, 10};
  const auto oc = organize(img, cam, 5.0);
  for (auto f : oc.valid) EXPECT_EQ(f, 0);
  EXPECT_EQ(to_point_cloud(oc).size(), 0u);
}

}  // namespace
}  // namespace ppf
