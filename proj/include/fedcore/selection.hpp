#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedcore/cluster.hpp"
#include "fedcore/matrix.hpp"
#include "fedcore/privacy.hpp"
#include "fedcore/reduce.hpp"

namespace fedcore {

enum class SelectorKind { kFedhds, kFedhdsIntra, kFeddb, kRandom, kPerplexity, kCoresetCent };

std::string_view to_string(SelectorKind kind) noexcept;
SelectorKind parse_selector_kind(std::string_view text);

// ---------------------------------------------------------------- protocol

struct CentroidUpload {
  std::size_t client_id = 0;
  std::size_t group_id = 0;
  std::vector<double> values;
};

struct SelectionNotice {
  std::size_t client_id = 0;
  std::vector<std::size_t> selected_group_ids;  // ascending
};

struct Coreset {
  std::size_t client_id = 0;
  std::vector<std::size_t> sample_indices;  // ascending, unique
};

struct IntraSelection {
  ClusteringResult clustering;
  /// Raw centroid of each group, in group order. Never leaves the client.
  std::vector<std::vector<double>> centroids;
};

IntraSelection intra_select(const Matrix& fused, const HdbscanConfig& config);

struct InterSelection {
  /// One notice per uploading client, ascending client id; may be empty.
  std::vector<SelectionNotice> notices;
  std::size_t second_level_clusters = 0;
  std::size_t second_level_noise = 0;
  std::size_t selected = 0;
};

/// Second-level HDBSCAN over the uploads. Each second-level cluster elects the
/// upload nearest its centroid (ties: lowest (client_id, group_id)); every
/// noise upload is elected on its own.
InterSelection inter_select(std::span<const CentroidUpload> uploads, const HdbscanConfig& config);

/// For each selected group, the member nearest the raw centroid in fused space.
Coreset build_coreset(const Matrix& fused, const IntraSelection& intra,
                      const SelectionNotice& notice);

// ---------------------------------------------------------------- baselines

/// ceil(ratio * n) indices drawn uniformly without replacement, ascending.
std::vector<std::size_t> random_select(std::size_t n, double ratio, std::uint64_t seed);

/// The ceil(ratio * n) lowest scores; ties go to the lower index. Ascending.
std::vector<std::size_t> perplexity_select(std::optional<std::span<const double>> scores,
                                           double ratio);

/// k-means with k = round(sqrt(n)); each non-empty cluster offers its
/// max(1, round(ratio * size)) members nearest the centroid, and the offer is
/// trimmed or padded to ceil(ratio * n) by distance to the own centroid
/// (ties: lower index). Ascending indices into `pooled`.
std::vector<std::size_t> coreset_cent(const Matrix& pooled, double ratio, std::uint64_t seed);

/// Reducer output for a client; clients too small or too uniform to embed
/// get the all-zero embedding, which clusters into one group.
Matrix fuse(const Matrix& features, const ReducerConfig& config);

// ---------------------------------------------------------------- round pipeline

struct ClientFeatures {
  std::size_t client_id = 0;
  Matrix features;  // n x (layer_count * layer_dim)
  std::size_t layer_count = 1;
  std::size_t layer_dim = 1;
  std::optional<std::vector<double>> perplexity;

  std::size_t size() const noexcept { return features.rows(); }
  Matrix last_layer() const { return features.col_slice((layer_count - 1) * layer_dim, layer_dim); }
};

struct SelectorConfig {
  SelectorKind kind = SelectorKind::kFedhds;
  /// Kept fraction for random, perplexity and coreset_cent.
  double ratio = 0.05;
  HdbscanConfig intra{5, std::nullopt};
  HdbscanConfig inter{2, std::nullopt};
  ReducerConfig reducer;
  DPConfig privacy;

  void validate() const;
};

struct ClientSelection {
  std::size_t client_id = 0;
  std::size_t dataset_size = 0;
  std::vector<std::size_t> coreset;
  std::size_t groups = 0;
  std::size_t noise = 0;
  Matrix fused;  // empty for selectors that never embed
  std::vector<int> labels;
};

struct RoundSelection {
  std::size_t round = 0;
  std::vector<ClientSelection> clients;  // input order
  std::vector<CentroidUpload> uploads;
  std::vector<SelectionNotice> notices;
  std::size_t second_level_clusters = 0;
  std::size_t second_level_noise = 0;
  std::size_t selected = 0;
};

/// Runs the configured selector over the given clients for one round. All
/// randomness derives from (master_seed, module, round, client).
RoundSelection select_round(std::span<const ClientFeatures* const> clients,
                            const SelectorConfig& config, std::size_t round,
                            std::uint64_t master_seed);

}  // namespace fedcore
