#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ppf/camera.hpp"
#include "ppf/evaluation.hpp"
#include "ppf/geometry.hpp"
#include "ppf/mesh.hpp"
#include "ppf/model_table.hpp"

namespace ppf::testing {

/// 640x480 pinhole camera, f = 572 px.
CameraIntrinsics test_camera();

inline constexpr double kBlobRadius = 60.0;
inline constexpr double kObjectDepth = 700.0;

/// Asymmetric star-shaped test object, diameter about 195 mm.
const Mesh& blob_mesh();

/// blob_mesh trained with the default configuration.
const ModelTable& blob_table();

Vec3 random_unit(std::mt19937_64& rng);
Mat3 random_rotation(std::mt19937_64& rng);
RigidTransform random_transform(std::mt19937_64& rng, double translation_range);

/// Uniformly random orientation, centered near the optical axis at the
/// given depth (x, y within +-lateral mm).
RigidTransform random_object_pose(std::mt19937_64& rng, double depth = kObjectDepth, double lateral = 40.0);

/// Rotates the object about its own origin by `angle` around a random axis
/// and shifts it by `distance` in a random direction.
RigidTransform perturb(const RigidTransform& pose, double angle, double distance, std::mt19937_64& rng);

/// Random cloud of oriented points in a cube of side `extent`.
OrientedPointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent);

/// Scene spec of the model at `pose` without distractors.
SceneSpec plain_scene(const RigidTransform& pose, double noise_sigma = 0.0, std::uint64_t seed = 0);

/// Adds one box between the camera and the object so that the hidden part
/// of the object's pixels lies in [min_occlusion, max_occlusion]. Returns
/// false when no placement was found.
bool add_occluder(SceneSpec& spec, const Mesh& model, double min_occlusion, double max_occlusion,
                  std::mt19937_64& rng);

}  // namespace ppf::testing
