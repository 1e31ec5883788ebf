#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ppf/geometry.hpp"
#include "ppf/ppf.hpp"
#include "ppf/preprocess.hpp"

namespace ppf {

/// One model pair stored under its feature key.
struct TableEntry {
  std::uint32_t ref;  ///< model reference point index
  float alpha;        ///< alpha_angle of the pair in the reference frame
};

/// Global model description: every ordered pair of the subsampled model
/// indexed by its discretized feature. Immutable after construction.
///
/// Storage is a dense CSR over the packed key space (a perfect hash), with
/// entries of one key ordered by (reference, partner) index.
class ModelTable {
 public:
  static constexpr std::uint16_t kFormatVersion = 1;

  /// Preprocesses `model_raw` with `sp`, then indexes all ordered pairs with
  /// distance <= d_max. `q.d_max` is ignored and replaced by the subsampled
  /// model diameter. Pairs whose normals are closer than `min_pair_angle`
  /// are skipped (0 keeps everything). Throws std::invalid_argument when
  /// fewer than 2 points survive preprocessing.
  static ModelTable build(const OrientedPointCloud& model_raw, const SubsampleParams& sp,
                          QuantizationParams q, double min_pair_angle = 0.0);

  /// Indexes an already preprocessed cloud (coordinates are rounded to
  /// single precision first so a saved table reloads bit-identically).
  static ModelTable from_cloud(const OrientedPointCloud& model, const SubsampleParams& sp,
                               QuantizationParams q, double min_pair_angle = 0.0);

  std::span<const TableEntry> lookup(std::uint32_t packed_key) const;

  const OrientedPointCloud& model() const { return model_; }
  const QuantizationParams& quant() const { return quant_; }
  const SubsampleParams& subsample_params() const { return subsample_; }
  double leaf() const { return subsample_.leaf; }
  double diameter() const { return quant_.d_max; }
  double min_pair_angle() const { return min_pair_angle_; }
  std::size_t entry_count() const { return entries_.size(); }
  /// Intermediate frame of each model point.
  const std::vector<RigidTransform>& frames() const { return frames_; }

  /// Calls fn(packed_key, entry) for every stored pair in storage order.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::uint32_t k = 0; k + 1 < offsets_.size(); ++k) {
      for (auto i = offsets_[k]; i < offsets_[k + 1]; ++i) fn(k, entries_[i]);
    }
  }

  /// PPFM binary format, little-endian.
  void serialize(std::ostream& out) const;
  static ModelTable deserialize(std::istream& in);
  std::vector<std::uint8_t> to_bytes() const;
  static ModelTable from_bytes(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ModelTable load(const std::filesystem::path& path);

 private:
  ModelTable() = default;
  void finish();

  OrientedPointCloud model_;
  QuantizationParams quant_;
  SubsampleParams subsample_;
  double min_pair_angle_ = 0.0;
  std::vector<std::uint64_t> offsets_;
  std::vector<TableEntry> entries_;
  std::vector<RigidTransform> frames_;
};

}  // namespace ppf
