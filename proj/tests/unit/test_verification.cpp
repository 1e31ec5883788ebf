#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "ppf/pipeline.hpp"
#include "ppf/verification.hpp"

namespace ppf {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Model {
  Mesh mesh;
  ModelTable table;
  ModelView view;
};

Model make_model(const Mesh& mesh) {
  PipelineConfig cfg;
  auto table = train_model(mesh, cfg);
  auto view = make_model_view(table, &mesh, cfg);
  return {mesh, std::move(table), std::move(view)};
}

const Model& blob() {
  static const Model m{testing::blob_mesh(), testing::blob_table(),
                       make_model_view(testing::blob_table(), &testing::blob_mesh(), PipelineConfig{})};
  return m;
}

const Model& cube() {
  static const Model m = make_model(make_box(Vec3(100, 100, 100), 4));
  return m;
}

// 150 x 150 x 4 mm plate.
const Model& plate() {
  static const Model m = make_model(make_box(Vec3(150, 150, 4), 6));
  return m;
}

SceneView view_of(const SceneSpec& spec, const Mesh& mesh, double leaf, const VerifyParams& p = {}) {
  return SceneView(generate_scene(spec, mesh).depth, spec.camera, p, 2.0 * leaf);
}

Primitive wall(double z, double size = 1200.0) {
  Primitive w;
  w.kind = Primitive::Kind::kBox;
  w.size = Vec3(size, size, 10.0);
  w.pose = RigidTransform::translation_only(Vec3(0, 0, z + 5.0));
  return w;
}

PoseHypothesis hyp(const RigidTransform& pose, std::int64_t votes = 100, std::uint32_t ref = 0) {
  PoseHypothesis h;
  h.pose = pose;
  h.votes = votes;
  h.scene_ref = ref;
  return h;
}

RigidTransform blob_pose() {
  return RigidTransform::from_axis_angle(Vec3(1, -2, 0.5).normalized(), 0.8, Vec3(10, -5, 700));
}

// Cube turned so that three faces are visible.
RigidTransform cube_pose() {
  const Mat3 r = (Eigen::AngleAxisd(0.6, Vec3::UnitX()) * Eigen::AngleAxisd(-0.7, Vec3::UnitY())).toRotationMatrix();
  return RigidTransform(r, Vec3(15, 10, 650));
}

TEST(DepthEdges, StepAndMissingData) {
  DepthImage img(12, 6);
  for (int v = 0; v < 6; ++v) {
    for (int u = 0; u < 12; ++u) img.at(u, v) = u < 6 ? 500.0f : 600.0f;
  }
  img.at(10, 3) = 0.0f;
  const auto e = depth_edges(img, 40.0, 0);
  auto at = [&](int u, int v) { return e[std::size_t(v) * 12 + u] != 0; };
  EXPECT_TRUE(at(5, 0));
  EXPECT_TRUE(at(6, 0));
  EXPECT_FALSE(at(4, 0));
  EXPECT_FALSE(at(2, 2));
  EXPECT_TRUE(at(10, 3));
  EXPECT_TRUE(at(9, 3));
  EXPECT_TRUE(at(10, 2));
  EXPECT_FALSE(at(8, 1));
  const auto small_jump = depth_edges(img, 150.0, 0);
  EXPECT_FALSE(small_jump[5]);
  const auto dilated = depth_edges(img, 40.0, 2);
  EXPECT_TRUE(dilated[std::size_t(0) * 12 + 3]);
  EXPECT_FALSE(dilated[std::size_t(0) * 12 + 2]);
}

TEST(Rescore, SelfConsistency) {
  const auto& m = blob();
  const auto scene = view_of(testing::plain_scene(blob_pose()), m.mesh, m.view.leaf);
  EXPECT_GE(rescore(blob_pose(), scene, m.view, VerifyParams{}), 0.99);
}

TEST(Rescore, OffObjectHypothesisScoresLow) {
  const auto& m = blob();
  const auto spec = testing::plain_scene(blob_pose());
  auto wall_spec = spec;
  wall_spec.distractors.push_back(wall(1000.0));
  for (const auto& s : {spec, wall_spec}) {
    const auto scene = view_of(s, m.mesh, m.view.leaf);
    const auto moved = RigidTransform::translation_only(Vec3(250, 0, 0)) * blob_pose();
    const double score = rescore(moved, scene, m.view, VerifyParams{});
    EXPECT_LE(score, 0.1);
    EXPECT_GE(score, 0.0);
  }
}

TEST(Rescore, CubeShiftedByItsWidth) {
  // Cube facing the camera: +100 mm along x puts the hypothesis beside it.
  const auto& m = cube();
  const auto pose = RigidTransform::translation_only(Vec3(0, 0, 650));
  auto spec = testing::plain_scene(pose);
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto moved = RigidTransform::translation_only(Vec3(100, 0, 0)) * pose;
  EXPECT_LE(rescore(moved, scene, m.view, VerifyParams{}), 0.1);
  EXPECT_GE(rescore(pose, scene, m.view, VerifyParams{}), 0.99);
}

TEST(Rescore, NoMeasurementsGivesZero) {
  const auto& m = blob();
  const SceneView empty(DepthImage(640, 480), testing::test_camera(), VerifyParams{}, 2.0 * m.view.leaf);
  EXPECT_EQ(rescore(blob_pose(), empty, m.view, VerifyParams{}), 0.0);
  // Pose behind the camera renders nothing.
  EXPECT_EQ(rescore(RigidTransform::translation_only(Vec3(0, 0, -700)), empty, m.view, VerifyParams{}), 0.0);
}

TEST(Rescore, NoiseNeverHelpsGroundTruth) {
  const auto& m = blob();
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pose = testing::random_object_pose(rng);
    const auto clean = view_of(testing::plain_scene(pose), m.mesh, m.view.leaf);
    const auto noisy = view_of(testing::plain_scene(pose, 6.0, trial), m.mesh, m.view.leaf);
    const double a = rescore(pose, clean, m.view, VerifyParams{});
    const double b = rescore(pose, noisy, m.view, VerifyParams{});
    EXPECT_GE(a, b);
    EXPECT_LE(a, 1.0);
  }
}

TEST(ProjectiveIcp, GroundTruthIsFixedPointOnCube) {
  const auto& m = cube();
  const auto scene = view_of(testing::plain_scene(cube_pose()), m.mesh, m.view.leaf);
  const auto r = projective_icp(hyp(cube_pose()), scene, m.view, VerifyParams{});
  EXPECT_FALSE(r.low_support);
  EXPECT_EQ(r.hypothesis.status, HypothesisStatus::kRefined);
  EXPECT_LT(rotation_distance(r.hypothesis.pose.rotation(), cube_pose().rotation()), 0.05 * kDeg);
  EXPECT_LT((r.hypothesis.pose.translation() - cube_pose().translation()).norm(), 0.05);
}

TEST(ProjectiveIcp, ConvergesFromPerturbation) {
  const auto& m = blob();
  const double d = m.table.diameter();
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 6; ++trial) {
    const auto gt = testing::random_object_pose(rng);
    const auto scene = view_of(testing::plain_scene(gt), m.mesh, m.view.leaf);
    const auto start = testing::perturb(gt, 5.0 * kDeg, 0.02 * d, rng);
    for (auto metric : {IcpMetric::kPointToPlane, IcpMetric::kPointToPoint}) {
      const auto r = projective_icp(hyp(start), scene, m.view, VerifyParams{}, metric);
      const double rot = rotation_distance(r.hypothesis.pose.rotation(), gt.rotation());
      const double trans = (r.hypothesis.pose.translation() - gt.translation()).norm();
      if (metric == IcpMetric::kPointToPlane) {
        const double rot0 = rotation_distance(start.rotation(), gt.rotation());
        const double trans0 = (start.translation() - gt.translation()).norm();
        EXPECT_LT(rot, rot0);
        EXPECT_LT(trans, trans0);
        EXPECT_LT(rot, 1.0 * kDeg) << "trial " << trial;
        EXPECT_LT(trans, 0.01 * d) << "trial " << trial;
      }
      EXPECT_TRUE(r.hypothesis.pose.is_valid(1e-9));
      for (const auto& s : r.steps) EXPECT_LE(s.rms_after, s.rms_before + 1e-12);
    }
  }
}

TEST(ProjectiveIcp, OffObjectIsLowSupport) {
  const auto& m = blob();
  const auto scene = view_of(testing::plain_scene(blob_pose()), m.mesh, m.view.leaf);
  const auto away = RigidTransform::translation_only(Vec3(250, 0, 0)) * blob_pose();
  const auto r = projective_icp(hyp(away), scene, m.view, VerifyParams{});
  EXPECT_TRUE(r.low_support);
  EXPECT_TRUE(r.hypothesis.low_support);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(r.hypothesis.pose.rotation(), away.rotation());
  EXPECT_EQ(r.hypothesis.pose.translation(), away.translation());
}

TEST(ConsistencyFilter, ExactPoseKept) {
  const auto& m = blob();
  auto spec = testing::plain_scene(blob_pose());
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto stats = consistency_stats(blob_pose(), scene, m.view, VerifyParams{});
  EXPECT_LT(stats.fraction(), 0.01);
  EXPECT_TRUE(consistency_filter(blob_pose(), scene, m.view, VerifyParams{}));
}

TEST(ConsistencyFilter, FloatingInFrontOfWallRejected) {
  const auto& m = blob();
  auto spec = testing::plain_scene(blob_pose());
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  // Beside the real object and 100 mm in front of the wall.
  const auto floating = RigidTransform::translation_only(Vec3(250, 0, 900)) *
                        RigidTransform(blob_pose().rotation(), Vec3::Zero());
  const auto stats = consistency_stats(floating, scene, m.view, VerifyParams{});
  EXPECT_GT(stats.fraction(), 0.9);
  EXPECT_FALSE(consistency_filter(floating, scene, m.view, VerifyParams{}));
}

TEST(ConsistencyFilter, OcclusionIsConsistent) {
  const auto& m = blob();
  auto spec = testing::plain_scene(blob_pose());
  spec.distractors.push_back(wall(1000.0));
  std::mt19937_64 rng(63);
  ASSERT_TRUE(testing::add_occluder(spec, m.mesh, 0.4, 0.6, rng));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto stats = consistency_stats(blob_pose(), scene, m.view, VerifyParams{});
  EXPECT_GT(stats.occluded, stats.measured / 4);
  EXPECT_TRUE(consistency_filter(blob_pose(), scene, m.view, VerifyParams{}));
}

TEST(ConsistencyFilter, EmptyMaskRejected) {
  const auto& m = blob();
  const auto scene = view_of(testing::plain_scene(blob_pose()), m.mesh, m.view.leaf);
  EXPECT_FALSE(consistency_filter(RigidTransform::translation_only(Vec3(0, 0, -500)), scene, m.view, VerifyParams{}));
}

// Blob resting on a table plane that recedes from the camera.
SceneSpec table_scene() {
  auto spec = testing::plain_scene(RigidTransform::translation_only(Vec3(0, 0, 700)) *
                                   RigidTransform::from_axis_angle(Vec3::UnitZ(), 0.3));
  const double tilt = 30.0 * kDeg;
  const Vec3 up(0, -std::cos(tilt), -std::sin(tilt));
  Primitive table;
  table.kind = Primitive::Kind::kBox;
  table.size = Vec3(1000, 10, 1000);
  table.pose = RigidTransform::from_axis_angle(Vec3::UnitX(), tilt, Vec3(0, 85, 700) - 5.0 * up);
  spec.distractors.push_back(table);
  return spec;
}

TEST(EdgeOverlapFilter, ObjectOnTableKept) {
  const auto& m = blob();
  const auto spec = table_scene();
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto stats = edge_overlap_stats(spec.gt_pose, scene, m.view);
  EXPECT_GT(stats.silhouette, 100u);
  EXPECT_GE(stats.rate(), 0.3);
  EXPECT_TRUE(edge_overlap_filter(spec.gt_pose, scene, m.view, VerifyParams{}));
}

TEST(EdgeOverlapFilter, PlaneInsideWallRejected) {
  const auto& m = plate();
  auto spec = testing::plain_scene(RigidTransform::translation_only(Vec3(0, 0, 2000)));
  spec.distractors.push_back(wall(1000.0));
  const auto scene = SceneView(generate_scene(spec, m.mesh).depth, spec.camera, VerifyParams{}, 2.0 * m.view.leaf);
  const auto on_wall = RigidTransform::translation_only(Vec3(30, -20, 998));
  EXPECT_GE(rescore(on_wall, scene, m.view, VerifyParams{}), 0.99);
  EXPECT_LT(edge_overlap_stats(on_wall, scene, m.view).rate(), 0.05);
  EXPECT_FALSE(edge_overlap_filter(on_wall, scene, m.view, VerifyParams{}));
}

TEST(EdgeOverlapFilter, ThresholdSemantics) {
  const auto& m = plate();
  // Plate half over a wall edge: part of its silhouette lies on the wall's border.
  auto spec = testing::plain_scene(RigidTransform::translation_only(Vec3(0, 0, 2000)));
  Primitive half = wall(1000.0, 400.0);
  half.pose = RigidTransform::translation_only(Vec3(200, 0, 1005));
  spec.distractors.push_back(half);
  const auto scene = SceneView(generate_scene(spec, m.mesh).depth, spec.camera, VerifyParams{}, 2.0 * m.view.leaf);
  const auto pose = RigidTransform::translation_only(Vec3(20, 0, 998));
  const double rate = edge_overlap_stats(pose, scene, m.view).rate();
  ASSERT_GT(rate, 0.0);
  ASSERT_LT(rate, 1.0);
  VerifyParams p;
  p.edge_overlap_min = rate;
  EXPECT_TRUE(edge_overlap_filter(pose, scene, m.view, p));
  p.edge_overlap_min = std::nextafter(rate, 1.0);
  EXPECT_FALSE(edge_overlap_filter(pose, scene, m.view, p));
}

TEST(Filters, ArePurePredicates) {
  const auto& m = blob();
  auto spec = testing::plain_scene(blob_pose());
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const VerifyParams p;
  std::mt19937_64 rng(64);
  for (int k = 0; k < 10; ++k) {
    const auto pose = testing::perturb(blob_pose(), 10.0 * kDeg, 30.0, rng);
    const bool e1 = edge_overlap_filter(pose, scene, m.view, p);
    const bool c1 = consistency_filter(pose, scene, m.view, p);
    const bool c2 = consistency_filter(pose, scene, m.view, p);
    const bool e2 = edge_overlap_filter(pose, scene, m.view, p);
    EXPECT_EQ(c1, c2);
    EXPECT_EQ(e1, e2);
  }
}

TEST(VerifyPipeline, PerfectHypothesisAccepted) {
  const auto& m = blob();
  auto spec = testing::plain_scene(blob_pose());
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto out = verify_pipeline({hyp(blob_pose())}, scene, m.view, VerifyParams{});
  ASSERT_TRUE(out.best);
  EXPECT_EQ(out.best->status, HypothesisStatus::kAccepted);
  EXPECT_GE(out.best->score, 0.99);
  EXPECT_LT(rotation_distance(out.best->pose.rotation(), blob_pose().rotation()), 1.0 * kDeg);
}

TEST(VerifyPipeline, AllRejectedGivesNone) {
  const auto& m = blob();
  auto spec = testing::plain_scene(blob_pose());
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto floating = RigidTransform::translation_only(Vec3(250, 0, 900)) *
                        RigidTransform(blob_pose().rotation(), Vec3::Zero());
  const auto out = verify_pipeline({hyp(floating, 50), hyp(RigidTransform::translation_only(Vec3(0, 0, -800)), 40, 1)},
                                   scene, m.view, VerifyParams{});
  EXPECT_FALSE(out.best);
  ASSERT_EQ(out.ranked.size(), 2u);
  for (const auto& h : out.ranked) {
    EXPECT_TRUE(h.status == HypothesisStatus::kRejectedConsistency || h.status == HypothesisStatus::kRejectedEdge);
  }
  EXPECT_FALSE(verify_pipeline({}, scene, m.view, VerifyParams{}).best);
}

TEST(VerifyPipeline, PlaneDecoyLosesToTruePose) {
  // A plate standing 200 mm in front of a wall. The decoy lies flat on the
  // wall, fits the depth as well as the truth and has more votes.
  const auto& m = plate();
  const auto truth = RigidTransform::translation_only(Vec3(-40, 10, 800));
  auto spec = testing::plain_scene(truth);
  spec.distractors.push_back(wall(1000.0));
  const auto scene = view_of(spec, m.mesh, m.view.leaf);
  const auto decoy = RigidTransform::translation_only(Vec3(150, -60, 998));
  const auto out = verify_pipeline({hyp(decoy, 500, 0), hyp(truth, 20, 1)}, scene, m.view, VerifyParams{});
  ASSERT_TRUE(out.best);
  EXPECT_LT((out.best->pose.translation() - truth.translation()).norm(), 2.0);
  std::size_t rejected_edge = 0;
  for (const auto& h : out.ranked) rejected_edge += h.status == HypothesisStatus::kRejectedEdge;
  EXPECT_EQ(rejected_edge, 1u);
}

TEST(VerifyParams, Validation) {
  VerifyParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.fit(5.0), 10.0);
  EXPECT_DOUBLE_EQ(p.reject_dist(4.0), 10.0);
  p.edge_overlap_min = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = VerifyParams{};
  p.icp_top = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ppf
