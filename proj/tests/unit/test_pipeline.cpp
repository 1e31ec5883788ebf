#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ppf/pipeline.hpp"

namespace ppf {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

const Detector& blob_detector(int workers = 1) {
  static const PipelineConfig cfg;
  static const Detector one(testing::blob_table(), make_model_view(testing::blob_table(), &testing::blob_mesh(), cfg),
                            cfg);
  static const Detector four(testing::blob_table(),
                             make_model_view(testing::blob_table(), &testing::blob_mesh(), cfg.with_workers(4)),
                             cfg.with_workers(4));
  return workers == 1 ? one : four;
}

TEST(Train, ResolvesLeafFromDiameter) {
  const auto& mesh = testing::blob_mesh();
  const double d = model_diameter(mesh);
  EXPECT_DOUBLE_EQ(d, oracle::diameter(mesh.vertices));
  const auto& t = testing::blob_table();
  EXPECT_DOUBLE_EQ(t.leaf(), PipelineConfig{}.leaf_frac * d);
  EXPECT_GT(t.model().size(), 200u);
  EXPECT_LE(t.diameter(), d);
  EXPECT_GT(t.diameter(), 0.9 * d);
}

TEST(Train, SamplesCarryMeshNormals) {
  const auto& mesh = testing::blob_mesh();
  const double leaf = 10.0;
  const auto s = model_samples(mesh, leaf);
  EXPECT_GT(s.size(), mesh.vertices.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 7) {
    EXPECT_TRUE(is_unit(s.normal(i)));
    EXPECT_GT(s.normal(i).dot(s.point(i).normalized()), 0.0);
  }
  Mesh points;
  points.vertices = mesh.vertices;
  points.normals = mesh.normals;
  EXPECT_EQ(model_samples(points, leaf).size(), mesh.vertices.size());
}

TEST(Train, DeterministicBytes) {
  const PipelineConfig cfg;
  EXPECT_EQ(train_model(testing::blob_mesh(), cfg).to_bytes(), testing::blob_table().to_bytes());
  auto other = cfg;
  other.leaf_frac = 0.08;
  const auto coarse = train_model(testing::blob_mesh(), other);
  EXPECT_LT(coarse.model().size(), testing::blob_table().model().size());
  EXPECT_THROW(train_model(Mesh{}, cfg), std::invalid_argument);
}

TEST(Detect, FindsObjectInCleanScene) {
  std::mt19937_64 rng(101);
  const auto& det = blob_detector();
  const double leaf = testing::blob_table().leaf();
  for (int k = 0; k < 3; ++k) {
    const auto gt = testing::random_object_pose(rng);
    const auto spec = testing::plain_scene(gt);
    const auto r = det.detect(generate_scene(spec, testing::blob_mesh()).depth, spec.camera);
    ASSERT_TRUE(r.detected) << k;
    EXPECT_LT(rotation_distance(r.pose.rotation(), gt.rotation()), 1.0 * kDeg) << k;
    EXPECT_LT((r.pose.translation() - gt.translation()).norm(), leaf) << k;
    EXPECT_GE(r.score, 0.9);
    EXPECT_EQ(r.filters.consistency, true);
    EXPECT_EQ(r.filters.edge, true);
    EXPECT_GT(r.clusters, 0u);
    EXPECT_GE(r.raw_hypotheses, r.clusters);
    EXPECT_GT(r.timings.total_ms, 0.0);
  }
}

TEST(Detect, EmptySceneGivesNoDetection) {
  const auto cam = testing::test_camera();
  const auto r = blob_detector().detect(DepthImage(cam.width, cam.height), cam);
  EXPECT_FALSE(r.detected);
  EXPECT_EQ(r.scene_points, 0u);
  EXPECT_FALSE(r.filters.consistency.has_value());
  EXPECT_TRUE(to_json(r)["pose"].is_null());
}

TEST(Detect, RejectsMismatchedImage) {
  const auto cam = testing::test_camera();
  EXPECT_THROW(blob_detector().detect(DepthImage(10, 10), cam), std::invalid_argument);
}

TEST(Detect, SameOutcomeAcrossWorkerCounts) {
  std::mt19937_64 rng(102);
  for (int k = 0; k < 2; ++k) {
    auto spec = testing::plain_scene(testing::random_object_pose(rng), 2.0, 100 + k);
    testing::add_occluder(spec, testing::blob_mesh(), 0.1, 0.3, rng);
    const auto depth = generate_scene(spec, testing::blob_mesh()).depth;
    const auto a = blob_detector(1).detect(depth, spec.camera);
    const auto b = blob_detector(4).detect(depth, spec.camera);
    const auto c = blob_detector(1).detect(depth, spec.camera);
    EXPECT_TRUE(a.same_outcome(b)) << k;
    EXPECT_TRUE(a.same_outcome(c)) << k;
    auto ja = to_json(a), jb = to_json(b);
    ja.erase("timings_ms");
    jb.erase("timings_ms");
    EXPECT_EQ(ja.dump(), jb.dump());
  }
}

TEST(Detect, ConfigRoundTripReproducesResult) {
  std::mt19937_64 rng(103);
  const auto spec = testing::plain_scene(testing::random_object_pose(rng), 1.0, 7);
  const auto depth = generate_scene(spec, testing::blob_mesh()).depth;
  const PipelineConfig cfg = config_from_json(to_json(PipelineConfig{}));
  const Detector again(testing::blob_table(), make_model_view(testing::blob_table(), &testing::blob_mesh(), cfg), cfg);
  EXPECT_TRUE(again.detect(depth, spec.camera).same_outcome(blob_detector().detect(depth, spec.camera)));
}

TEST(Detect, PointModelWithSplatRendering) {
  // Without a mesh the verifier renders the table's points as splats.
  std::mt19937_64 rng(104);
  const PipelineConfig cfg;
  const auto view = make_model_view(testing::blob_table(), nullptr, cfg);
  EXPECT_EQ(view.points.size(), testing::blob_table().model().size());
  const Detector det(testing::blob_table(), view, cfg);
  const auto gt = testing::random_object_pose(rng);
  const auto spec = testing::plain_scene(gt);
  const auto r = det.detect(generate_scene(spec, testing::blob_mesh()).depth, spec.camera);
  ASSERT_TRUE(r.detected);
  EXPECT_LT(rotation_distance(r.pose.rotation(), gt.rotation()), 3.0 * kDeg);
  EXPECT_LT((r.pose.translation() - gt.translation()).norm(), 2.0 * testing::blob_table().leaf());
}

}  // namespace
}  // namespace ppf
