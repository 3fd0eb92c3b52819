#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedcore/matrix.hpp"

namespace fedcore {

// Clustering scores take per-point labels where -1 marks noise. Noise points
// are left out of calinski_harabasz and silhouette.

/// (B / (k - 1)) / (W / (n - k)). Fewer than two clusters or W = 0 is undefined.
double calinski_harabasz(const Matrix& points, std::span<const int> labels);

/// Mean of (b - a) / max(a, b); members of singleton clusters score 0.
double silhouette(const Matrix& points, std::span<const int> labels);

/// Rows of `weights` are matched to columns so that the summed weight is
/// maximal. Returns, per row, the matched column or -1 when there are more rows
/// than columns.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights);

/// Macro F1 over true classes after a maximum-overlap one-to-one matching of
/// predicted clusters to classes. Noise predictions match nothing.
double clustering_f1(std::span<const int> predicted, std::span<const int> truth);

/// Sum of coreset sizes over sum of dataset sizes.
double data_ratio(std::span<const std::size_t> coreset_sizes,
                  std::span<const std::size_t> dataset_sizes);

/// Trustworthiness of an embedding at `k` neighbors: penalizes output-space
/// neighbors that are far down the input-space ranking.
double trustworthiness(const Matrix& input, const Matrix& embedding, std::size_t k);

struct ClassificationScores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Accuracy and per-class F1 averaged over every class that occurs in either
/// the predictions or the truth.
ClassificationScores classification_scores(std::span<const int> predicted,
                                           std::span<const int> truth);

}  // namespace fedcore
