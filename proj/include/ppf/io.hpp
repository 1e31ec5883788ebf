#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppf/camera.hpp"
#include "ppf/error.hpp"
#include "ppf/mesh.hpp"

namespace ppf {

// ---------------------------------------------------------------------------
// PLY

enum class PlyFormat { kAscii, kBinaryLittleEndian };

/// Parses vertices (x, y, z and optional nx, ny, nz; other properties are
/// skipped) and faces (vertex_indices / vertex_index lists, polygons fanned
/// into triangles). Unknown elements are skipped. Normals are returned only
/// when all three components are present and non-degenerate.
Mesh parse_ply(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ply(const Mesh& mesh, PlyFormat format);
void write_ply(const std::filesystem::path& path, const Mesh& mesh, PlyFormat format);

/// Reads a model in mm. Missing normals are taken from the faces when
/// there are any, otherwise estimated with PCA over `normal_k` neighbors
/// and oriented away from the centroid (degenerate points are dropped).
Mesh load_model_file(const std::filesystem::path& path, int normal_k = 20);

// ---------------------------------------------------------------------------
// Depth images and intrinsics

/// Raw 16-bit single-channel image.
struct RawDepth {
  int width = 0, height = 0;
  std::vector<std::uint16_t> values;
};

RawDepth read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const RawDepth& raw);

/// depth_mm = raw * depth_scale; raw values round to nearest, clamped to
/// [0, 65535].
DepthImage depth_from_raw(const RawDepth& raw, double depth_scale);
RawDepth depth_to_raw(const DepthImage& depth, double depth_scale);

/// Key-value text (`key value`, `key: value` or `key = value`, '#' starts a
/// comment) with fx, fy, cx, cy, width, height.
CameraIntrinsics parse_intrinsics(const std::string& text);
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
std::string format_intrinsics(const CameraIntrinsics& cam);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& cam);

std::pair<DepthImage, CameraIntrinsics> load_depth(const std::filesystem::path& depth_path,
                                                   double depth_scale,
                                                   const std::filesystem::path& intrinsics_path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ppf
