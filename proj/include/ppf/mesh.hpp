#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ppf/geometry.hpp"

namespace ppf {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. `normals` is either empty or one unit normal per
/// vertex; faces may be empty (point-only models).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<Triangle> faces;

  bool has_faces() const { return !faces.empty(); }
  bool has_normals() const { return !normals.empty() && normals.size() == vertices.size(); }
};

/// Area-weighted average of incident face normals. Vertices with no incident
/// faces keep +z.
void compute_vertex_normals(Mesh& mesh);

/// Axis-aligned box centered at the origin. Each side is tessellated into a
/// `subdivisions` x `subdivisions` grid with its own vertices so normals stay
/// sharp at the edges.
Mesh make_box(const Vec3& size, int subdivisions = 1);

Mesh make_uv_sphere(double radius, int rings = 16, int segments = 32);

/// Smooth, star-shaped test object without rotational or mirror symmetry.
/// `radius` sets the overall scale (diameter roughly 2.6 * radius).
Mesh make_blob(double radius, int rings = 48, int segments = 96);

Mesh transform_mesh(const Mesh& mesh, const RigidTransform& t);

/// Appends `other` to `mesh` (indices shifted).
void append_mesh(Mesh& mesh, const Mesh& other);

/// Deterministic surface sampling with roughly `spacing` mm between samples.
/// Normals are interpolated vertex normals when the mesh has them, face
/// normals otherwise.
OrientedPointCloud sample_surface(const Mesh& mesh, double spacing);

/// Vertex cloud of a mesh that carries normals.
OrientedPointCloud vertex_cloud(const Mesh& mesh);

}  // namespace ppf
