#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedcore/matrix.hpp"

namespace fedcore {

enum class ReducerMethod { kTsne, kPca, kKpca };

struct TsneConfig {
  double perplexity = 30.0;
  double theta = 0.5;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  /// Clients at or below this size use the exact O(n^2) gradient.
  std::size_t exact_threshold = 64;
};

struct KpcaConfig {
  /// RBF width; 1 / input_dim when unset.
  std::optional<double> gamma;
};

struct ReducerConfig {
  ReducerMethod method = ReducerMethod::kTsne;
  std::size_t output_dim = 2;
  TsneConfig tsne;
  KpcaConfig kpca;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fuses n x d features into n x k coordinates with the configured method.
/// Requires n >= 2 and finite input; deterministic for a given config.
Matrix reduce(const Matrix& features, const ReducerConfig& config);

// ---------------------------------------------------------------- PCA / KPCA

struct PcaFit {
  Matrix projection;    // n x k scores
  Matrix components;    // k x d unit directions
  std::vector<double> mean;
  std::vector<double> explained_variance;
  std::vector<double> explained_variance_ratio;

  /// Back-projection of the scores into input space.
  Matrix reconstruct() const;
};

/// Principal components by symmetric eigendecomposition of the covariance
/// (or Gram matrix when d > n). Each component's largest-magnitude entry is positive.
PcaFit fit_pca(const Matrix& features, std::size_t k);

Matrix kernel_pca(const Matrix& features, std::size_t k, std::optional<double> gamma);

// ---------------------------------------------------------------- t-SNE

/// perplexity capped at floor((n - 1) / 3), never below 1.
double effective_perplexity(double requested, std::size_t n) noexcept;

/// Per-row Gaussian conditionals p(j|i) over the nearest neighbors of i.
struct ConditionalAffinities {
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> neighbors;
  std::vector<std::vector<double>> probabilities;
  std::vector<double> beta;  // precision 1 / (2 sigma_i^2) of each row
};

/// Symmetric joint probabilities in CSR form; entries sum to 1.
struct SparseAffinities {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets;
  std::vector<std::size_t> columns;
  std::vector<double> values;

  double sum() const noexcept;
  double at(std::size_t i, std::size_t j) const noexcept;
};

/// Bisection on each row's precision until the Shannon entropy matches
/// log(perplexity) to 1e-5. Neighbors: min(n - 1, floor(3 * perplexity)).
ConditionalAffinities tsne_conditional(const Matrix& features, double perplexity);
SparseAffinities symmetrize(const ConditionalAffinities& conditional);
SparseAffinities tsne_affinities(const Matrix& features, double perplexity);

/// Unnormalized repulsion sum_j q^2 (y_i - y_j) per point, plus Z = sum q.
struct Repulsion {
  Matrix forces;
  double normalizer = 0.0;
};

Repulsion exact_repulsion(const Matrix& embedding);
/// Quadtree approximation (k = 2). theta = 0 visits every leaf.
Repulsion bh_repulsion(const Matrix& embedding, double theta);

/// KL gradient 4 * (sum_j p_ij q_ij Z (y_i - y_j) - rep_i / Z).
Matrix exact_gradient(const Matrix& embedding, const SparseAffinities& affinities,
                      double exaggeration = 1.0);
/// Barnes-Hut gradient; falls back to exact_gradient when k != 2.
Matrix bh_gradient(const Matrix& embedding, const SparseAffinities& affinities, double theta,
                   double exaggeration = 1.0);

/// KL(P || Q) with Q computed exactly over all pairs.
double tsne_kl(const SparseAffinities& affinities, const Matrix& embedding);

struct TsneResult {
  Matrix embedding;
  double kl_after_exaggeration = 0.0;
  double kl_final = 0.0;
};

TsneResult run_tsne(const Matrix& features, std::size_t output_dim, const TsneConfig& config,
                    bool track_kl = false);

}  // namespace fedcore
