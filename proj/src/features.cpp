#include "fedcore/features.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "fedcore/error.hpp"
#include "fedcore/rng.hpp"
#include "json.hpp"

namespace fedcore {
namespace {

constexpr std::string_view kMagic = "FEDCORE1";
constexpr std::size_t kMaxHeaderBytes = 1 << 16;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void read_exact(std::istream& in, std::vector<unsigned char>& buffer, std::size_t bytes,
                std::string_view what) {
  buffer.resize(bytes);
  if (bytes == 0) return;
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    fail(ErrorKind::kTruncated, "archive truncated while reading " + std::string(what));
  }
}

std::size_t header_size(const nlohmann::json& header, std::string_view key) {
  const auto it = header.find(key);
  if (it == header.end() || !it->is_number_unsigned()) {
    fail(ErrorKind::kMalformedHeader, "header field '" + std::string(key) + "' missing or invalid");
  }
  return it->get<std::size_t>();
}

bool header_flag(const nlohmann::json& header, std::string_view key) {
  const auto it = header.find(key);
  if (it == header.end() || !it->is_boolean()) {
    fail(ErrorKind::kMalformedHeader, "header field '" + std::string(key) + "' missing or invalid");
  }
  return it->get<bool>();
}

}  // namespace

std::string_view to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::kFullModel: return "full-model";
    case SourceTag::kProxy: return "proxy";
    case SourceTag::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

SourceTag parse_source_tag(std::string_view text) {
  if (text == "full-model") return SourceTag::kFullModel;
  if (text == "proxy") return SourceTag::kProxy;
  if (text == "synthetic") return SourceTag::kSynthetic;
  fail(ErrorKind::kValidation, "unknown source_tag '" + std::string(text) + "'");
}

void FeatureArchive::validate() const {
  if (layer_count == 0 || layer_dim == 0) {
    fail(ErrorKind::kValidation, "layer_count and layer_dim must be at least 1");
  }
  if (features.size() != n_samples * feature_dim()) {
    fail(ErrorKind::kDimensionMismatch, "feature payload does not match n_samples * l * v");
  }
  for (const float f : features) {
    if (!std::isfinite(f)) fail(ErrorKind::kNonFinite, "non-finite feature value");
  }
  if (labels && labels->size() != n_samples) {
    fail(ErrorKind::kDimensionMismatch, "label count does not match n_samples");
  }
  if (perplexity) {
    if (perplexity->size() != n_samples) {
      fail(ErrorKind::kDimensionMismatch, "perplexity count does not match n_samples");
    }
    for (const float p : *perplexity) {
      if (!std::isfinite(p)) fail(ErrorKind::kNonFinite, "non-finite perplexity value");
      if (p <= 0.0f) fail(ErrorKind::kValidation, "perplexity values must be positive");
    }
  }
}

Matrix FeatureArchive::to_matrix() const {
  std::vector<double> data(features.begin(), features.end());
  return Matrix(n_samples, feature_dim(), std::move(data));
}

Matrix FeatureArchive::layer_matrix(std::size_t layer) const {
  if (layer >= layer_count) fail(ErrorKind::kDimensionMismatch, "layer index out of range");
  Matrix out(n_samples, layer_dim);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto src = row(i).subspan(layer * layer_dim, layer_dim);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (n_modes < 1) fail(ErrorKind::kValidation, "n_modes must be at least 1");
  if (!(mode_separation > 0.0)) fail(ErrorKind::kValidation, "mode_separation must be positive");
  if (!(mode_stddev > 0.0)) fail(ErrorKind::kValidation, "mode_stddev must be positive");
  if (layer_count < 1 || layer_dim < 1) {
    fail(ErrorKind::kValidation, "layer_count and layer_dim must be at least 1");
  }
}

RawFeature assemble_raw_feature(const LayerStates& states) {
  if (states.layers.empty()) fail(ErrorKind::kEmptyInput, "no layer states");
  const std::size_t dim = states.layers.front().size();
  if (dim == 0) fail(ErrorKind::kEmptyInput, "layer states are empty");
  RawFeature out;
  out.layer_count = states.layers.size();
  out.layer_dim = dim;
  out.values.reserve(out.layer_count * dim);
  for (const auto& layer : states.layers) {
    if (layer.size() != dim) {
      fail(ErrorKind::kDimensionMismatch, "layer states have different dimensions");
    }
    for (const float v : layer) {
      if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, "non-finite hidden state");
    }
    out.values.insert(out.values.end(), layer.begin(), layer.end());
  }
  return out;
}

std::size_t write_archive(const FeatureArchive& archive, std::ostream& out) {
  archive.validate();
  nlohmann::ordered_json header;
  header["magic"] = kMagic;
  header["n_samples"] = archive.n_samples;
  header["layer_count"] = archive.layer_count;
  header["layer_dim"] = archive.layer_dim;
  header["has_labels"] = archive.labels.has_value();
  header["has_perplexity"] = archive.perplexity.has_value();
  header["source_tag"] = to_string(archive.source_tag);
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));

  std::size_t bytes = line.size();
  for (const float f : archive.features) put_u32(out, std::bit_cast<std::uint32_t>(f));
  bytes += 4 * archive.features.size();
  if (archive.labels) {
    for (const auto label : *archive.labels) put_u32(out, label);
    bytes += 4 * archive.labels->size();
  }
  if (archive.perplexity) {
    for (const float p : *archive.perplexity) put_u32(out, std::bit_cast<std::uint32_t>(p));
    bytes += 4 * archive.perplexity->size();
  }
  if (!out) fail(ErrorKind::kIo, "failed writing feature archive");
  return bytes;
}

std::size_t write_archive(const FeatureArchive& archive, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  const auto bytes = write_archive(archive, out);
  out.close();
  if (!out) fail(ErrorKind::kIo, "failed closing " + path.string());
  return bytes;
}

FeatureArchive read_archive(std::istream& in) {
  std::string line;
  for (;;) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      fail(ErrorKind::kMalformedHeader, "archive header is not newline-terminated");
    }
    if (c == '\n') break;
    line.push_back(static_cast<char>(c));
    if (line.size() > kMaxHeaderBytes) fail(ErrorKind::kMalformedHeader, "archive header too long");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kMalformedHeader, std::string("archive header is not JSON: ") + e.what());
  }
  if (!header.is_object()) fail(ErrorKind::kMalformedHeader, "archive header is not an object");
  const auto magic = header.find("magic");
  if (magic == header.end() || !magic->is_string() || magic->get<std::string>() != kMagic) {
    fail(ErrorKind::kMalformedHeader, "bad archive magic");
  }
  FeatureArchive archive;
  archive.n_samples = header_size(header, "n_samples");
  archive.layer_count = header_size(header, "layer_count");
  archive.layer_dim = header_size(header, "layer_dim");
  const bool has_labels = header_flag(header, "has_labels");
  const bool has_perplexity = header_flag(header, "has_perplexity");
  const auto tag = header.find("source_tag");
  if (tag == header.end() || !tag->is_string()) {
    fail(ErrorKind::kMalformedHeader, "header field 'source_tag' missing or invalid");
  }
  try {
    archive.source_tag = parse_source_tag(tag->get<std::string>());
  } catch (const Error& e) {
    fail(ErrorKind::kMalformedHeader, e.what());
  }
  if (archive.layer_count == 0 || archive.layer_dim == 0) {
    fail(ErrorKind::kMalformedHeader, "layer_count and layer_dim must be at least 1");
  }

  std::vector<unsigned char> buffer;
  read_exact(in, buffer, 4 * archive.n_samples * archive.feature_dim(), "feature records");
  archive.features.resize(archive.n_samples * archive.feature_dim());
  for (std::size_t i = 0; i < archive.features.size(); ++i) {
    archive.features[i] = std::bit_cast<float>(get_u32(buffer.data() + 4 * i));
  }
  if (has_labels) {
    read_exact(in, buffer, 4 * archive.n_samples, "labels");
    auto& labels = archive.labels.emplace(archive.n_samples);
    for (std::size_t i = 0; i < archive.n_samples; ++i) labels[i] = get_u32(buffer.data() + 4 * i);
  }
  if (has_perplexity) {
    read_exact(in, buffer, 4 * archive.n_samples, "perplexity");
    auto& scores = archive.perplexity.emplace(archive.n_samples);
    for (std::size_t i = 0; i < archive.n_samples; ++i) {
      scores[i] = std::bit_cast<float>(get_u32(buffer.data() + 4 * i));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorKind::kValidation, "trailing bytes after archive payload");
  }
  archive.validate();
  return archive;
}

FeatureArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return read_archive(in);
}

Matrix mode_centers(std::size_t n_modes, std::size_t dim, double separation, Rng& rng) {
  Matrix centers(n_modes, dim);
  for (double& v : centers.data()) v = rng.normal();
  if (n_modes < 2) return centers;
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n_modes; ++a) {
    for (std::size_t b = a + 1; b < n_modes; ++b) {
      closest = std::min(closest, distance(centers.row(a), centers.row(b)));
    }
  }
  const double scale = separation / closest;
  for (double& v : centers.data()) v *= scale;
  return centers;
}

FeatureArchive synth_archive(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const std::size_t dim = spec.layer_count * spec.layer_dim;
  // Centers are inflated slightly so float32 rounding cannot pull a pair below
  // the requested separation.
  const Matrix centers = mode_centers(spec.n_modes, dim, spec.mode_separation * (1.0 + 1e-6), rng);

  FeatureArchive archive;
  archive.n_samples = spec.n_modes * spec.samples_per_mode;
  archive.layer_count = spec.layer_count;
  archive.layer_dim = spec.layer_dim;
  archive.source_tag = SourceTag::kSynthetic;
  archive.features.reserve(archive.n_samples * dim);
  auto& labels = archive.labels.emplace();
  auto& scores = archive.perplexity.emplace();
  for (std::size_t m = 0; m < spec.n_modes; ++m) {
    for (std::size_t s = 0; s < spec.samples_per_mode; ++s) {
      for (std::size_t d = 0; d < dim; ++d) {
        archive.features.push_back(
            static_cast<float>(centers(m, d) + spec.mode_stddev * rng.normal()));
      }
      labels.push_back(static_cast<std::uint32_t>(m));
      scores.push_back(static_cast<float>(std::exp(1.0 + 0.5 * rng.normal())));
    }
  }
  return archive;
}

}  // namespace fedcore
