#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcore/features.hpp"
#include "fedcore/matrix.hpp"
#include "fedcore/metrics.hpp"
#include "fedcore/partition.hpp"
#include "fedcore/selection.hpp"

namespace fedcore {

// ---------------------------------------------------------------- toy model

/// Multinomial logistic regression. values = W (classes x dim, row-major) then b.
struct ModelParams {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  static ModelParams zeros(std::size_t classes, std::size_t dim);
  std::vector<double> logits(std::span<const double> x) const;
  int predict(std::span<const double> x) const;  // lowest index wins ties

  bool operator==(const ModelParams&) const = default;
};

/// Cross-entropy of one sample and its gradient with respect to `values`.
double sample_loss(const ModelParams& params, std::span<const double> x, int label);
std::vector<double> sample_gradient(const ModelParams& params, std::span<const double> x, int label);

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 0.01;
  std::size_t epochs = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// One gradient step per sample, rows in order, for each epoch. Optimizer
/// state starts fresh on every call. Empty input yields nullopt (skip signal).
std::optional<ModelParams> local_train(const ModelParams& params, const Matrix& features,
                                       std::span<const int> labels, const TrainConfig& config);

struct ClientUpdate {
  std::size_t client_id = 0;
  ModelParams params;
  std::size_t coreset_size = 0;
};

/// Weighted mean with lambda_i = |coreset_i| / sum |coreset_j|, reduced in
/// ascending client-id order. nullopt when every coreset is empty.
std::optional<ModelParams> aggregate(std::span<const ClientUpdate> updates);

/// max(1, round(ratio * n)) distinct ids, ascending; depends only on (seed, round).
std::vector<std::size_t> sample_clients(std::size_t n_clients, double active_ratio,
                                        std::size_t round, std::uint64_t seed);

ClassificationScores evaluate(const ModelParams& params, const Matrix& features,
                              std::span<const int> labels);

// ---------------------------------------------------------------- datasets

struct FederatedDataset {
  std::vector<ClientFeatures> clients;  // client_id = position
  std::vector<std::vector<int>> labels;
  Matrix heldout_features;
  std::vector<int> heldout_labels;
  std::size_t classes = 0;

  std::size_t total_samples() const noexcept;
  void validate() const;
};

/// Each client draws `modes_per_client` distinct modes out of `total_modes`
/// and splits its samples evenly over them.
struct ModesBenchmark {
  std::size_t clients = 200;
  std::size_t samples_per_client = 500;
  std::size_t total_modes = 50;
  std::size_t modes_per_client = 5;
  double mode_separation = 20.0;
  double mode_stddev = 0.5;
  std::size_t layer_count = 4;
  std::size_t layer_dim = 8;
  std::size_t heldout_per_mode = 10;

  void validate() const;
};

/// Each client holds `distinct_per_client` base samples, each replicated
/// `replicas` times with N(0, jitter^2) noise. Base samples lie around the
/// center of a uniformly drawn mode, which is also their label.
struct DuplicatesBenchmark {
  std::size_t clients = 10;
  std::size_t distinct_per_client = 10;
  std::size_t replicas = 50;
  double jitter = 0.01;
  std::size_t modes = 10;
  double mode_separation = 4.0;
  double mode_stddev = 1.0;
  std::size_t layer_count = 2;
  std::size_t layer_dim = 8;
  std::size_t heldout_per_mode = 50;

  void validate() const;
};

/// A single labeled pool split into held-out and client data.
struct PoolSource {
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::string> archive;
  PartitionSpec partition;
  /// Samples with these labels form the held-out set; when empty,
  /// `heldout_fraction` of the pool is drawn at random instead.
  std::vector<std::uint32_t> holdout_labels;
  double heldout_fraction = 0.2;
};

FederatedDataset build_modes(const ModesBenchmark& spec, std::uint64_t seed);
FederatedDataset build_duplicates(const DuplicatesBenchmark& spec, std::uint64_t seed);
struct PoolSplit {
  std::vector<std::size_t> heldout_indices;  // into the pool
  std::vector<std::size_t> train_indices;    // into the pool, in partition order
  ClientAssignment assignment;               // over train_indices
};

FederatedDataset build_pool(const PoolSource& source, std::uint64_t seed,
                            PoolSplit* split_out = nullptr);
FederatedDataset from_archives(std::span<const FeatureArchive> clients,
                               const FeatureArchive& heldout);

FeatureArchive client_archive(const FederatedDataset& data, std::size_t client);
FeatureArchive heldout_archive(const FederatedDataset& data);

// ---------------------------------------------------------------- round loop

enum class SelectionSchedule { kEveryRound, kOnce };

struct SimulationConfig {
  std::size_t rounds = 40;
  double active_ratio = 0.05;
  SelectorConfig selector;
  SelectionSchedule schedule = SelectionSchedule::kEveryRound;
  TrainConfig training;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> active_clients;
  std::vector<std::size_t> coreset_sizes;
  std::vector<std::size_t> dataset_sizes;
  std::vector<std::size_t> noise_counts;
  double data_ratio = 0.0;
  double cumulative_data_ratio = 0.0;
  ClassificationScores heldout;
  std::size_t uploads = 0;
  std::size_t second_level_clusters = 0;
  std::size_t second_level_noise = 0;
  std::size_t selected = 0;
  bool skipped = false;
};

struct RunHistory {
  ClassificationScores initial;
  std::vector<RoundRecord> rounds;
  ModelParams final_params;

  double cumulative_data_ratio() const noexcept;
  ClassificationScores final_scores() const noexcept;
};

/// Called once per selection pass (every round, or once before round 0).
using SelectionObserver = std::function<void(const RoundSelection&)>;

RunHistory run(const FederatedDataset& data, const SimulationConfig& config,
               const SelectionObserver& observer = {});

}  // namespace fedcore
