#include "ppf/model_table.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

#include "binary_io.hpp"
#include "ppf/error.hpp"

namespace ppf {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'F', 'M'};

OrientedPointCloud round_to_float(const OrientedPointCloud& c) {
  std::vector<Vec3> pts(c.size()), nrm(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    pts[i] = c.point(i).cast<float>().cast<double>();
    nrm[i] = c.normal(i).cast<float>().cast<double>();
  }
  return {std::move(pts), std::move(nrm)};
}

}  // namespace

ModelTable ModelTable::build(const OrientedPointCloud& model_raw, const SubsampleParams& sp,
                             QuantizationParams q, double min_pair_angle) {
  if (model_raw.empty()) throw std::invalid_argument("build_model_table: empty model");
  return from_cloud(preprocess_cloud(model_raw, sp), sp, q, min_pair_angle);
}

ModelTable ModelTable::from_cloud(const OrientedPointCloud& model, const SubsampleParams& sp,
                                  QuantizationParams q, double min_pair_angle) {
  sp.validate();
  if (model.size() < 2) {
    throw std::invalid_argument("build_model_table: fewer than 2 model points");
  }
  ModelTable t;
  t.model_ = round_to_float(model);
  t.subsample_ = sp;
  t.min_pair_angle_ = min_pair_angle;
  q.d_max = t.model_.diameter();
  q.validate();
  t.quant_ = q;

  const std::size_t n = t.model_.size();
  t.frames_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.frames_.push_back(intermediate_frame(t.model_.point(i), t.model_.normal(i)));
  }

  // Two passes: count per key, then fill in (i, j) order.
  const std::uint32_t space = q.key_space();
  std::vector<std::uint32_t> keys;
  std::vector<TableEntry> staged;
  keys.reserve(n * (n - 1));
  staged.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& pi = t.model_.point(i);
    const Vec3& ni = t.model_.normal(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Vec3& pj = t.model_.point(j);
      const Vec3& nj = t.model_.normal(j);
      if ((pj - pi).norm() > q.d_max) continue;
      if (min_pair_angle > 0.0 && angle_between(ni, nj) < min_pair_angle) continue;
      const auto f = try_compute_ppf(pi, ni, pj, nj);
      if (!f) continue;
      keys.push_back(discretize(*f, q).pack(q));
      staged.push_back({static_cast<std::uint32_t>(i),
                        static_cast<float>(alpha_angle(t.frames_[i], pj))});
    }
  }
  t.offsets_.assign(static_cast<std::size_t>(space) + 1, 0);
  for (auto k : keys) ++t.offsets_[k + 1];
  for (std::size_t k = 0; k < space; ++k) t.offsets_[k + 1] += t.offsets_[k];
  t.entries_.resize(staged.size());
  std::vector<std::uint64_t> cursor(t.offsets_.begin(), t.offsets_.end() - 1);
  for (std::size_t e = 0; e < staged.size(); ++e) t.entries_[cursor[keys[e]]++] = staged[e];
  return t;
}

std::span<const TableEntry> ModelTable::lookup(std::uint32_t packed_key) const {
  if (packed_key + 1 >= offsets_.size()) return {};
  return {entries_.data() + offsets_[packed_key],
          static_cast<std::size_t>(offsets_[packed_key + 1] - offsets_[packed_key])};
}

void ModelTable::finish() {
  frames_.clear();
  frames_.reserve(model_.size());
  for (std::size_t i = 0; i < model_.size(); ++i) {
    frames_.push_back(intermediate_frame(model_.point(i), model_.normal(i)));
  }
}

std::vector<std::uint8_t> ModelTable::to_bytes() const {
  detail::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kFormatVersion);
  w.put<double>(quant_.d_max);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(quant_.n_dist_bins));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(quant_.n_angle_bins));
  w.put<double>(quant_.noise_fraction);
  w.put<double>(subsample_.leaf);
  w.put<double>(subsample_.normal_cluster_angle);
  w.put<std::uint8_t>(subsample_.merge_neighbor_clusters ? 1 : 0);
  w.put<double>(min_pair_angle_);
  w.put<std::uint64_t>(model_.size());
  w.put<double>(model_.diameter());
  for (std::size_t i = 0; i < model_.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.put<float>(static_cast<float>(model_.point(i)[k]));
    for (int k = 0; k < 3; ++k) w.put<float>(static_cast<float>(model_.normal(i)[k]));
  }
  w.put<std::uint64_t>(entries_.size());
  for_each([&](std::uint32_t key, const TableEntry& e) {
    w.put<std::uint32_t>(key);
    w.put<std::uint32_t>(e.ref);
    w.put<float>(e.alpha);
  });
  return std::move(w.bytes());
}

ModelTable ModelTable::from_bytes(std::span<const std::uint8_t> bytes) {
  using Kind = ParseError::Kind;
  detail::ByteReader r(bytes, "PPFM");
  r.need(4);
  if (std::memcmp(r.cursor(), kMagic, 4) != 0) {
    throw ParseError(Kind::kMalformedHeader, "PPFM: bad magic", ParseError::Where::kOffset, 0);
  }
  r.skip(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kFormatVersion) {
    throw ParseError(Kind::kUnsupported, "PPFM: unsupported version " + std::to_string(version),
                     ParseError::Where::kOffset, 4);
  }
  ModelTable t;
  t.quant_.d_max = r.get<double>();
  t.quant_.n_dist_bins = static_cast<int>(r.get<std::uint32_t>());
  t.quant_.n_angle_bins = static_cast<int>(r.get<std::uint32_t>());
  t.quant_.noise_fraction = r.get<double>();
  t.subsample_.leaf = r.get<double>();
  t.subsample_.normal_cluster_angle = r.get<double>();
  t.subsample_.merge_neighbor_clusters = r.get<std::uint8_t>() != 0;
  t.min_pair_angle_ = r.get<double>();
  try {
    t.quant_.validate();
    t.subsample_.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(Kind::kMalformedHeader, std::string("PPFM: ") + e.what(),
                     ParseError::Where::kOffset, r.position());
  }
  const auto n = r.get<std::uint64_t>();
  const double diameter = r.get<double>();
  if (n < 2 || n > r.remaining() / 24) {
    throw ParseError(Kind::kTruncatedBody, "PPFM: point count does not fit the file",
                     ParseError::Where::kOffset, r.position());
  }
  std::vector<Vec3> pts(n), nrm(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) pts[i][k] = r.get<float>();
    for (int k = 0; k < 3; ++k) nrm[i][k] = r.get<float>();
  }
  try {
    t.model_ = OrientedPointCloud(std::move(pts), std::move(nrm));
  } catch (const std::invalid_argument& e) {
    throw ParseError(Kind::kMalformedBody, std::string("PPFM: ") + e.what(),
                     ParseError::Where::kOffset, r.position());
  }
  if (t.model_.diameter() != diameter) {
    throw ParseError(Kind::kMalformedBody, "PPFM: stored diameter does not match the points",
                     ParseError::Where::kOffset, r.position());
  }
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / 12) {
    throw ParseError(Kind::kTruncatedBody, "PPFM: entry count does not fit the file",
                     ParseError::Where::kOffset, r.position());
  }
  const std::uint32_t space = t.quant_.key_space();
  t.offsets_.assign(static_cast<std::size_t>(space) + 1, 0);
  t.entries_.resize(count);
  std::uint32_t prev = 0;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto at = r.position();
    const auto key = r.get<std::uint32_t>();
    const auto ref = r.get<std::uint32_t>();
    const auto alpha = r.get<float>();
    if (key >= space || ref >= n || key < prev) {
      throw ParseError(Kind::kMalformedBody, "PPFM: invalid or unsorted entry record",
                       ParseError::Where::kOffset, at);
    }
    prev = key;
    ++t.offsets_[key + 1];
    t.entries_[e] = {ref, alpha};
  }
  if (r.remaining() != 0) {
    throw ParseError(Kind::kMalformedBody, "PPFM: trailing bytes", ParseError::Where::kOffset,
                     r.position());
  }
  for (std::size_t k = 0; k < space; ++k) t.offsets_[k + 1] += t.offsets_[k];
  t.finish();
  return t;
}

void ModelTable::serialize(std::ostream& out) const {
  const auto bytes = to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelTable ModelTable::deserialize(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

void ModelTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(ParseError::Kind::kIo, "cannot open " + path.string() + " for writing");
  serialize(out);
  if (!out) throw ParseError(ParseError::Kind::kIo, "write failed: " + path.string());
}

ModelTable ModelTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::kIo, "cannot open " + path.string());
  return deserialize(in);
}

}  // namespace ppf
