#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedcore/matrix.hpp"

namespace fedcore {

class Rng;

/// Last-token hidden state of each transformer layer for one sample, in layer order.
struct LayerStates {
  std::vector<std::vector<float>> layers;
};

/// Concatenation of all layer states; layer i occupies [i*layer_dim, (i+1)*layer_dim).
struct RawFeature {
  std::vector<float> values;
  std::size_t layer_count = 0;
  std::size_t layer_dim = 0;

  std::span<const float> layer(std::size_t i) const {
    return std::span<const float>(values).subspan(i * layer_dim, layer_dim);
  }
};

enum class SourceTag { kFullModel, kProxy, kSynthetic };

std::string_view to_string(SourceTag tag) noexcept;
SourceTag parse_source_tag(std::string_view text);

struct FeatureArchive {
  std::size_t n_samples = 0;
  std::size_t layer_count = 1;
  std::size_t layer_dim = 1;
  /// n_samples rows of layer_count*layer_dim floats, row-major.
  std::vector<float> features;
  std::optional<std::vector<std::uint32_t>> labels;
  std::optional<std::vector<float>> perplexity;
  SourceTag source_tag = SourceTag::kSynthetic;

  std::size_t feature_dim() const noexcept { return layer_count * layer_dim; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(features).subspan(i * feature_dim(), feature_dim());
  }

  /// Throws Error on any broken invariant.
  void validate() const;

  /// All layers, widened to double.
  Matrix to_matrix() const;
  /// The `layer`-th v-dimensional slice of every row.
  Matrix layer_matrix(std::size_t layer) const;

  bool operator==(const FeatureArchive&) const = default;
};

struct SyntheticSpec {
  std::size_t n_modes = 1;
  double mode_separation = 10.0;
  double mode_stddev = 1.0;
  std::size_t layer_count = 1;
  std::size_t layer_dim = 2;
  std::size_t samples_per_mode = 1;

  void validate() const;
};

RawFeature assemble_raw_feature(const LayerStates& states);

/// Archive layout: one JSON header line, then little-endian float32 records,
/// then optional uint32 labels and float32 perplexities.
std::size_t write_archive(const FeatureArchive& archive, std::ostream& out);
std::size_t write_archive(const FeatureArchive& archive, const std::filesystem::path& path);
FeatureArchive read_archive(std::istream& in);
FeatureArchive read_archive(const std::filesystem::path& path);

/// Deterministic centers with minimum pairwise distance exactly `separation`:
/// Gaussian directions rescaled by separation / (closest pair distance).
Matrix mode_centers(std::size_t n_modes, std::size_t dim, double separation, Rng& rng);

/// Mode-major samples (`samples_per_mode` per mode) around mode_centers, labels
/// = mode ids, log-normal perplexity scores. Same spec and seed give identical bytes.
FeatureArchive synth_archive(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace fedcore
