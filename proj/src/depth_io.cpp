#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "ppf/io.hpp"

namespace ppf {

namespace {

using Kind = ParseError::Kind;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

RawDepth read_png16(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ParseError(Kind::kIo, "cannot open " + path.string());
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw ParseError(Kind::kIo, "libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  RawDepth raw;
  volatile bool bad_format = false;
  std::string format_msg;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(Kind::kMalformedBody, path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (bit_depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
    bad_format = true;
    format_msg = path.string() + ": expected a 16-bit single-channel image (bit depth " +
                 std::to_string(bit_depth) + ", color type " + std::to_string(color) + ")";
  } else {
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.values.resize(std::size_t(raw.width) * raw.height);
    png_set_swap(png);  // PNG stores big-endian samples
    png_read_update_info(png, info);
    rows.resize(raw.height);
    for (int y = 0; y < raw.height; ++y) {
      rows[y] = reinterpret_cast<png_bytep>(raw.values.data() + std::size_t(y) * raw.width);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_format) throw ParseError(Kind::kUnsupported, format_msg);
  return raw;
}

void write_png16(const std::filesystem::path& path, const RawDepth& raw) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw ParseError(Kind::kIo, "cannot open " + path.string() + " for writing");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw ParseError(Kind::kIo, "libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(raw.height);
  std::vector<std::uint16_t> copy = raw.values;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ParseError(Kind::kIo, path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, raw.width, raw.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  for (int y = 0; y < raw.height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(copy.data() + std::size_t(y) * raw.width);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

DepthImage depth_from_raw(const RawDepth& raw, double depth_scale) {
  if (!(depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
  DepthImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    img.data()[i] = static_cast<float>(raw.values[i] * depth_scale);
  }
  return img;
}

RawDepth depth_to_raw(const DepthImage& depth, double depth_scale) {
  if (!(depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
  RawDepth raw{depth.width(), depth.height(), std::vector<std::uint16_t>(depth.data().size())};
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const double v = std::round(double(depth.data()[i]) / depth_scale);
    raw.values[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
  }
  return raw;
}

CameraIntrinsics parse_intrinsics(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line) {
      if (c == ':' || c == '=') c = ' ';
    }
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    double value;
    if (!(ls >> value)) {
      throw ParseError(Kind::kMalformedBody, "intrinsics: missing value for '" + key + "'",
                       ParseError::Where::kLine, line_no);
    }
    kv[key] = value;
  }
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
    if (!kv.count(key)) {
      throw ParseError(Kind::kMalformedBody, std::string("intrinsics: missing key '") + key + "'");
    }
  }
  CameraIntrinsics cam{kv["fx"], kv["fy"], kv["cx"], kv["cy"], static_cast<int>(kv["width"]),
                       static_cast<int>(kv["height"])};
  try {
    cam.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(Kind::kMalformedBody, std::string("intrinsics: ") + e.what());
  }
  return cam;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  return parse_intrinsics(read_text_file(path));
}

std::string format_intrinsics(const CameraIntrinsics& cam) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "fx: %.17g\nfy: %.17g\ncx: %.17g\ncy: %.17g\nwidth: %d\nheight: %d\n",
                cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height);
  return buf;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& cam) {
  std::ofstream out(path);
  if (!out) throw ParseError(Kind::kIo, "cannot open " + path.string() + " for writing");
  out << format_intrinsics(cam);
}

std::pair<DepthImage, CameraIntrinsics> load_depth(const std::filesystem::path& depth_path,
                                                   double depth_scale,
                                                   const std::filesystem::path& intrinsics_path) {
  const CameraIntrinsics cam = read_intrinsics(intrinsics_path);
  const RawDepth raw = read_png16(depth_path);
  if (raw.width != cam.width || raw.height != cam.height) {
    throw ParseError(Kind::kMalformedBody, "depth image size does not match the intrinsics");
  }
  return {depth_from_raw(raw, depth_scale), cam};
}

}  // namespace ppf
