#include "ppf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ppf {

void compute_vertex_normals(Mesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const Vec3 n = (b - a).cross(c - a);  // length = 2 * area
    for (auto i : f) acc[i] += n;
  }
  mesh.normals.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double len = acc[i].norm();
    mesh.normals[i] = len > 0.0 ? Vec3(acc[i] / len) : Vec3::UnitZ();
  }
}

Mesh make_box(const Vec3& size, int subdivisions) {
  const int n = std::max(subdivisions, 1);
  const Vec3 h = size / 2.0;
  Mesh mesh;
  // For each axis and sign, a face spanned by the two other axes, wound
  // counter-clockwise seen from outside.
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign : {-1, 1}) {
      const int u_axis = (axis + 1) % 3;
      const int v_axis = (axis + 2) % 3;
      Vec3 normal = Vec3::Zero();
      normal[axis] = sign;
      const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
      for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
          Vec3 p;
          p[axis] = sign * h[axis];
          p[u_axis] = -h[u_axis] + size[u_axis] * i / n;
          p[v_axis] = -h[v_axis] + size[v_axis] * j / n;
          mesh.vertices.push_back(p);
          mesh.normals.push_back(normal);
        }
      }
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const std::uint32_t a = base + j * (n + 1) + i;
          const std::uint32_t b = a + 1;
          const std::uint32_t c = a + (n + 1);
          const std::uint32_t d = c + 1;
          // u x v points along +axis, so flip winding for the negative side.
          if (sign > 0) {
            mesh.faces.push_back({a, b, d});
            mesh.faces.push_back({a, d, c});
          } else {
            mesh.faces.push_back({a, d, b});
            mesh.faces.push_back({a, c, d});
          }
        }
      }
    }
  }
  return mesh;
}

namespace {

template <class RadiusFn>
Mesh make_star_shaped(int rings, int segments, RadiusFn radius_of) {
  rings = std::max(rings, 2);
  segments = std::max(segments, 3);
  Mesh mesh;
  const double pi = std::numbers::pi;
  mesh.vertices.push_back(radius_of(Vec3(0, 0, 1)));
  for (int r = 1; r < rings; ++r) {
    const double theta = pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * pi * s / segments;
      const Vec3 dir(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                     std::cos(theta));
      mesh.vertices.push_back(radius_of(dir));
    }
  }
  mesh.vertices.push_back(radius_of(Vec3(0, 0, -1)));
  const auto south = static_cast<std::uint32_t>(mesh.vertices.size() - 1);
  auto ring_vertex = [&](int r, int s) {
    return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments));
  };
  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
  }
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const auto a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      const auto c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      mesh.faces.push_back({a, c, d});
      mesh.faces.push_back({a, d, b});
    }
  }
  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s)});
  }
  compute_vertex_normals(mesh);
  return mesh;
}

}  // namespace

Mesh make_uv_sphere(double radius, int rings, int segments) {
  return make_star_shaped(rings, segments, [radius](const Vec3& d) { return Vec3(radius * d); });
}

Mesh make_blob(double radius, int rings, int segments) {
  return make_star_shaped(rings, segments, [radius](const Vec3& d) {
    const double lobe = std::pow(std::max(0.0, d.x()), 3);
    const double bump = std::exp(-12.0 * (d - Vec3(-0.3, 0.6, 0.74).normalized()).squaredNorm());
    const double r = radius * (1.0 + 0.22 * d.z() * d.z() - 0.18 * d.x() * d.y() + 0.35 * lobe +
                               0.25 * bump + 0.08 * std::sin(3.0 * d.y() + 1.0));
    return Vec3(1.3 * r * d.x(), r * d.y(), 0.8 * r * d.z());
  });
}

Mesh transform_mesh(const Mesh& mesh, const RigidTransform& t) {
  Mesh out = mesh;
  for (auto& v : out.vertices) v = t.apply(v);
  for (auto& n : out.normals) n = t.rotate(n).normalized();
  return out;
}

void append_mesh(Mesh& mesh, const Mesh& other) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  const bool keep_normals = (mesh.vertices.empty() || mesh.has_normals()) && other.has_normals();
  mesh.vertices.insert(mesh.vertices.end(), other.vertices.begin(), other.vertices.end());
  if (keep_normals) {
    mesh.normals.insert(mesh.normals.end(), other.normals.begin(), other.normals.end());
  } else {
    mesh.normals.clear();
  }
  for (const auto& f : other.faces) mesh.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

OrientedPointCloud sample_surface(const Mesh& mesh, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("sample_surface: spacing must be positive");
  std::vector<Vec3> pts, nrm;
  const bool smooth = mesh.has_normals();
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const Vec3 cross = (b - a).cross(c - a);
    if (cross.norm() <= 0.0) continue;
    const Vec3 face_n = cross.normalized();
    const double longest = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    const int n = std::max(1, static_cast<int>(std::ceil(longest / spacing)));
    // Centroids of the n^2 sub-triangles of a regular subdivision.
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n - i; ++j) {
        for (int up = 0; up < 2; ++up) {
          if (up == 1 && i + j + 1 >= n) continue;
          double u, v;
          if (up == 0) {
            u = (i + 1.0 / 3.0) / n;
            v = (j + 1.0 / 3.0) / n;
          } else {
            u = (i + 2.0 / 3.0) / n;
            v = (j + 2.0 / 3.0) / n;
          }
          const double w = 1.0 - u - v;
          pts.push_back(w * a + u * b + v * c);
          Vec3 normal = face_n;
          if (smooth) {
            const Vec3 blend =
                w * mesh.normals[f[0]] + u * mesh.normals[f[1]] + v * mesh.normals[f[2]];
            if (blend.norm() > 1e-9) normal = blend.normalized();
          }
          nrm.push_back(normal);
        }
      }
    }
  }
  return {std::move(pts), std::move(nrm)};
}

OrientedPointCloud vertex_cloud(const Mesh& mesh) {
  if (!mesh.has_normals()) throw std::invalid_argument("vertex_cloud: mesh has no normals");
  return {mesh.vertices, mesh.normals};
}

}  // namespace ppf
