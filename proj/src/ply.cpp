#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "binary_io.hpp"
#include "ppf/io.hpp"

namespace ppf {

namespace {

using Kind = ParseError::Kind;
using Where = ParseError::Where;

enum class Scalar { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<Scalar> scalar_from_name(const std::string& s) {
  if (s == "char" || s == "int8") return Scalar::kInt8;
  if (s == "uchar" || s == "uint8") return Scalar::kUInt8;
  if (s == "short" || s == "int16") return Scalar::kInt16;
  if (s == "ushort" || s == "uint16") return Scalar::kUInt16;
  if (s == "int" || s == "int32") return Scalar::kInt32;
  if (s == "uint" || s == "uint32") return Scalar::kUInt32;
  if (s == "float" || s == "float32") return Scalar::kFloat32;
  if (s == "double" || s == "float64") return Scalar::kFloat64;
  return std::nullopt;
}

// Cast a parsed value to the declared type so ascii and binary files with
// the same content produce identical numbers.
double narrow(double v, Scalar t) {
  switch (t) {
    case Scalar::kInt8: return static_cast<std::int8_t>(v);
    case Scalar::kUInt8: return static_cast<std::uint8_t>(v);
    case Scalar::kInt16: return static_cast<std::int16_t>(v);
    case Scalar::kUInt16: return static_cast<std::uint16_t>(v);
    case Scalar::kInt32: return static_cast<std::int32_t>(v);
    case Scalar::kUInt32: return static_cast<std::uint32_t>(v);
    case Scalar::kFloat32: return static_cast<float>(v);
    case Scalar::kFloat64: return v;
  }
  return v;
}

double read_binary(detail::ByteReader& r, Scalar t) {
  switch (t) {
    case Scalar::kInt8: return r.get<std::int8_t>();
    case Scalar::kUInt8: return r.get<std::uint8_t>();
    case Scalar::kInt16: return r.get<std::int16_t>();
    case Scalar::kUInt16: return r.get<std::uint16_t>();
    case Scalar::kInt32: return r.get<std::int32_t>();
    case Scalar::kUInt32: return r.get<std::uint32_t>();
    case Scalar::kFloat32: return r.get<float>();
    case Scalar::kFloat64: return r.get<double>();
  }
  return 0.0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::kFloat32;
  bool is_list = false;
  Scalar count_type = Scalar::kUInt8;
};

struct Element {
  std::string name;
  std::uint64_t count = 0;
  std::vector<Property> props;
};

struct Header {
  bool binary = false;
  std::vector<Element> elements;
  std::size_t body_offset = 0;
  std::size_t body_line = 0;  // 1-based line number of the first body line
};

Header parse_header(std::span<const std::uint8_t> bytes) {
  Header h;
  std::size_t pos = 0, line_no = 0;
  bool saw_format = false;
  auto next_line = [&](std::string& line) {
    if (pos >= bytes.size()) return false;
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    line.assign(reinterpret_cast<const char*>(bytes.data()) + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end < bytes.size() ? end + 1 : end;
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& msg, Kind kind = Kind::kMalformedHeader) {
    throw ParseError(kind, "PLY: " + msg, Where::kLine, line_no);
  };
  std::string line;
  if (!next_line(line) || line != "ply") fail("missing 'ply' magic");
  while (true) {
    if (!next_line(line)) fail("missing end_header");
    std::istringstream in(line);
    std::string word;
    in >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt, version;
      in >> fmt >> version;
      if (fmt == "ascii") {
        h.binary = false;
      } else if (fmt == "binary_little_endian") {
        h.binary = true;
      } else if (fmt == "binary_big_endian") {
        fail("binary_big_endian is not supported", Kind::kUnsupported);
      } else {
        fail("unknown format '" + fmt + "'");
      }
      saw_format = true;
    } else if (word == "element") {
      Element e;
      long long count = -1;
      in >> e.name >> count;
      if (e.name.empty() || count < 0 || in.fail()) fail("malformed element line");
      e.count = static_cast<std::uint64_t>(count);
      h.elements.push_back(std::move(e));
    } else if (word == "property") {
      if (h.elements.empty()) fail("property before any element");
      Property p;
      std::string type;
      in >> type;
      if (type == "list") {
        std::string ct, it;
        in >> ct >> it >> p.name;
        const auto c = scalar_from_name(ct);
        const auto i = scalar_from_name(it);
        if (!c || !i) fail("unknown list type", Kind::kUnsupported);
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        in >> p.name;
        const auto t = scalar_from_name(type);
        if (!t) fail("unknown property type '" + type + "'", Kind::kUnsupported);
        p.type = *t;
      }
      if (p.name.empty()) fail("property without a name");
      h.elements.back().props.push_back(std::move(p));
    } else {
      fail("unexpected header keyword '" + word + "'");
    }
  }
  if (!saw_format) fail("missing format line");
  h.body_offset = pos;
  h.body_line = line_no + 1;
  return h;
}

// Token stream over the ascii body that tracks line numbers.
class AsciiBody {
 public:
  AsciiBody(std::span<const std::uint8_t> bytes, std::size_t pos, std::size_t line)
      : bytes_(bytes), pos_(pos), line_(line) {}

  double next() {
    while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) {
      if (bytes_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= bytes_.size()) {
      throw ParseError(Kind::kTruncatedBody, "PLY: unexpected end of ascii body", Where::kLine, line_);
    }
    std::size_t end = pos_;
    while (end < bytes_.size() && !std::isspace(bytes_[end])) ++end;
    const char* first = reinterpret_cast<const char*>(bytes_.data()) + pos_;
    const char* last = reinterpret_cast<const char*>(bytes_.data()) + end;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw ParseError(Kind::kMalformedBody, "PLY: bad number '" + std::string(first, last) + "'",
                       Where::kLine, line_);
    }
    pos_ = end;
    return v;
  }
  std::size_t line() const { return line_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t line_;
};

}  // namespace

Mesh parse_ply(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes);
  Mesh mesh;
  std::vector<Vec3> normals;
  bool has_normals = false;

  detail::ByteReader bin(bytes.subspan(h.body_offset), "PLY");
  AsciiBody text(bytes, h.body_offset, h.body_line);
  auto value = [&](Scalar t) { return h.binary ? read_binary(bin, t) : narrow(text.next(), t); };
  auto location = [&]() -> std::pair<Where, std::uint64_t> {
    if (h.binary) return {Where::kOffset, h.body_offset + bin.position()};
    return {Where::kLine, text.line()};
  };

  bool seen_vertex = false;
  for (const auto& e : h.elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
      for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
        const auto& p = e.props[i];
        if (p.is_list) continue;
        if (p.name == "x") ix = i;
        if (p.name == "y") iy = i;
        if (p.name == "z") iz = i;
        if (p.name == "nx") inx = i;
        if (p.name == "ny") iny = i;
        if (p.name == "nz") inz = i;
      }
      if (ix < 0 || iy < 0 || iz < 0) {
        throw ParseError(Kind::kUnsupported, "PLY: vertex element lacks x/y/z");
      }
      has_normals = inx >= 0 && iny >= 0 && inz >= 0;
      seen_vertex = true;
      mesh.vertices.resize(e.count);
      if (has_normals) normals.resize(e.count);
      std::vector<double> row(e.props.size());
      for (std::uint64_t k = 0; k < e.count; ++k) {
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          const auto& p = e.props[i];
          if (p.is_list) {
            const auto n = static_cast<std::uint64_t>(value(p.count_type));
            for (std::uint64_t j = 0; j < n; ++j) value(p.type);
            row[i] = 0.0;
          } else {
            row[i] = value(p.type);
          }
        }
        mesh.vertices[k] = {row[ix], row[iy], row[iz]};
        if (has_normals) normals[k] = {row[inx], row[iny], row[inz]};
      }
    } else if (e.name == "face") {
      int idx = -1;
      for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
        const auto& p = e.props[i];
        if (p.name == "vertex_indices" || p.name == "vertex_index") idx = i;
      }
      if (idx < 0 || !e.props[idx].is_list) {
        throw ParseError(Kind::kUnsupported, "PLY: face element lacks a vertex_indices list");
      }
      std::vector<std::uint32_t> poly;
      for (std::uint64_t k = 0; k < e.count; ++k) {
        for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
          const auto& p = e.props[i];
          if (!p.is_list) {
            value(p.type);
            continue;
          }
          const auto [where, at] = location();
          const double n_raw = value(p.count_type);
          if (n_raw < 0) throw ParseError(Kind::kMalformedBody, "PLY: negative list size", where, at);
          const auto n = static_cast<std::uint64_t>(n_raw);
          poly.clear();
          for (std::uint64_t j = 0; j < n; ++j) {
            const double vi = value(p.type);
            if (i == idx) {
              if (vi < 0) throw ParseError(Kind::kMalformedBody, "PLY: negative vertex index", where, at);
              poly.push_back(static_cast<std::uint32_t>(vi));
            }
          }
          if (i != idx) continue;
          if (poly.size() < 3) {
            throw ParseError(Kind::kMalformedBody, "PLY: face with fewer than 3 vertices", where, at);
          }
          for (std::size_t j = 1; j + 1 < poly.size(); ++j) {
            mesh.faces.push_back({poly[0], poly[j], poly[j + 1]});
          }
        }
      }
    } else {
      // Unknown element: consume and ignore.
      for (std::uint64_t k = 0; k < e.count; ++k) {
        for (const auto& p : e.props) {
          if (p.is_list) {
            const auto n = static_cast<std::uint64_t>(value(p.count_type));
            for (std::uint64_t j = 0; j < n; ++j) value(p.type);
          } else {
            value(p.type);
          }
        }
      }
    }
  }
  if (!seen_vertex) throw ParseError(Kind::kUnsupported, "PLY: no vertex element");
  for (const auto& f : mesh.faces) {
    for (auto i : f) {
      if (i >= mesh.vertices.size()) {
        throw ParseError(Kind::kMalformedBody, "PLY: face index out of range");
      }
    }
  }
  for (const auto& v : mesh.vertices) {
    if (!v.allFinite()) throw ParseError(Kind::kMalformedBody, "PLY: non-finite vertex");
  }
  if (has_normals) {
    bool usable = true;
    for (auto& n : normals) {
      const double len = n.norm();
      if (!(len > 1e-9) || !std::isfinite(len)) {
        usable = false;
        break;
      }
      n /= len;
    }
    if (usable) mesh.normals = std::move(normals);
  }
  return mesh;
}

std::vector<std::uint8_t> encode_ply(const Mesh& mesh, PlyFormat format) {
  const bool normals = mesh.has_normals();
  std::ostringstream head;
  head << "ply\nformat " << (format == PlyFormat::kAscii ? "ascii" : "binary_little_endian")
       << " 1.0\nelement vertex " << mesh.vertices.size()
       << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (normals) head << "property float nx\nproperty float ny\nproperty float nz\n";
  head << "element face " << mesh.faces.size() << "\nproperty list uchar int vertex_indices\n"
       << "end_header\n";
  const std::string header = head.str();
  detail::ByteWriter w;
  w.put_bytes(header.data(), header.size());
  if (format == PlyFormat::kBinaryLittleEndian) {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      for (int k = 0; k < 3; ++k) w.put<float>(static_cast<float>(mesh.vertices[i][k]));
      if (normals) {
        for (int k = 0; k < 3; ++k) w.put<float>(static_cast<float>(mesh.normals[i][k]));
      }
    }
    for (const auto& f : mesh.faces) {
      w.put<std::uint8_t>(3);
      for (auto i : f) w.put<std::int32_t>(static_cast<std::int32_t>(i));
    }
    return std::move(w.bytes());
  }
  char buf[64];
  auto put_float = [&](double v, char sep) {
    const int n = std::snprintf(buf, sizeof buf, "%.9g%c", static_cast<double>(static_cast<float>(v)), sep);
    w.put_bytes(buf, static_cast<std::size_t>(n));
  };
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) put_float(mesh.vertices[i][k], (k == 2 && !normals) ? '\n' : ' ');
    if (normals) {
      for (int k = 0; k < 3; ++k) put_float(mesh.normals[i][k], k == 2 ? '\n' : ' ');
    }
  }
  for (const auto& f : mesh.faces) {
    const int n = std::snprintf(buf, sizeof buf, "3 %u %u %u\n", f[0], f[1], f[2]);
    w.put_bytes(buf, static_cast<std::size_t>(n));
  }
  return std::move(w.bytes());
}

void write_ply(const std::filesystem::path& path, const Mesh& mesh, PlyFormat format) {
  const auto bytes = encode_ply(mesh, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(Kind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError(Kind::kIo, "write failed: " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(Kind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

Mesh load_model_file(const std::filesystem::path& path, int normal_k) {
  Mesh mesh = parse_ply(read_file(path));
  if (mesh.has_normals()) return mesh;
  if (mesh.has_faces()) {
    compute_vertex_normals(mesh);
    return mesh;
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(std::max<std::size_t>(mesh.vertices.size(), 1));
  // Oriented toward the centroid, then flipped to point outward.
  const OrientedPointCloud est = estimate_normals(mesh.vertices, normal_k, centroid);
  Mesh out;
  out.vertices = est.points();
  for (const auto& n : est.normals()) out.normals.push_back(-n);
  return out;
}

}  // namespace ppf
