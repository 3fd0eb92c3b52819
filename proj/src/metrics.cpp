#include "fedcore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "fedcore/error.hpp"

namespace fedcore {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(ErrorKind::kDimensionMismatch, std::string(what) + ": length mismatch");
}

// Non-noise points grouped by label, labels in ascending order.
std::map<int, std::vector<std::size_t>> clusters_of(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[labels[i]].push_back(i);
  }
  return out;
}

// Hungarian method with potentials; rows <= cols. cost is minimized.
std::vector<int> min_cost_rows(const std::vector<std::vector<double>>& cost, std::size_t cols) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace

double calinski_harabasz(const Matrix& points, std::span<const int> labels) {
  check_lengths(points.rows(), labels.size(), "calinski_harabasz");
  const auto clusters = clusters_of(labels);
  const std::size_t k = clusters.size();
  if (k < 2) fail(ErrorKind::kUndefined, "calinski_harabasz needs at least two clusters");
  std::size_t n = 0;
  for (const auto& [label, members] : clusters) n += members.size();
  if (n <= k) fail(ErrorKind::kUndefined, "calinski_harabasz needs more points than clusters");

  const std::size_t d = points.cols();
  std::vector<double> overall(d, 0.0);
  for (const auto& [label, members] : clusters) {
    for (const std::size_t i : members) {
      for (std::size_t c = 0; c < d; ++c) overall[c] += points(i, c);
    }
  }
  for (double& x : overall) x /= static_cast<double>(n);

  double between = 0.0;
  double within = 0.0;
  for (const auto& [label, members] : clusters) {
    std::vector<double> mean(d, 0.0);
    for (const std::size_t i : members) {
      for (std::size_t c = 0; c < d; ++c) mean[c] += points(i, c);
    }
    for (double& x : mean) x /= static_cast<double>(members.size());
    between += static_cast<double>(members.size()) * squared_distance(mean, overall);
    for (const std::size_t i : members) within += squared_distance(points.row(i), mean);
  }
  if (within == 0.0) fail(ErrorKind::kUndefined, "within-cluster dispersion is zero");
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

double silhouette(const Matrix& points, std::span<const int> labels) {
  check_lengths(points.rows(), labels.size(), "silhouette");
  const auto clusters = clusters_of(labels);
  if (clusters.size() < 2) fail(ErrorKind::kUndefined, "silhouette needs at least two clusters");

  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& [own_label, own] : clusters) {
    for (const std::size_t i : own) {
      ++counted;
      if (own.size() == 1) continue;
      double a = 0.0;
      for (const std::size_t j : own) {
        if (j != i) a += distance(points.row(i), points.row(j));
      }
      a /= static_cast<double>(own.size() - 1);
      double b = std::numeric_limits<double>::infinity();
      for (const auto& [label, other] : clusters) {
        if (label == own_label) continue;
        double sum = 0.0;
        for (const std::size_t j : other) sum += distance(points.row(i), points.row(j));
        b = std::min(b, sum / static_cast<double>(other.size()));
      }
      const double denom = std::max(a, b);
      if (denom > 0.0) total += (b - a) / denom;
    }
  }
  return total / static_cast<double>(counted);
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
  const std::size_t rows = weights.size();
  if (rows == 0) return {};
  const std::size_t cols = weights.front().size();
  for (const auto& r : weights) {
    if (r.size() != cols) fail(ErrorKind::kDimensionMismatch, "ragged weight matrix");
  }
  if (cols == 0) return std::vector<int>(rows, -1);

  if (rows <= cols) {
    std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) cost[i][j] = -weights[i][j];
    }
    return min_cost_rows(cost, cols);
  }
  std::vector<std::vector<double>> cost(cols, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) cost[j][i] = -weights[i][j];
  }
  const auto col_to_row = min_cost_rows(cost, rows);
  std::vector<int> out(rows, -1);
  for (std::size_t j = 0; j < cols; ++j) out[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
  return out;
}

double clustering_f1(std::span<const int> predicted, std::span<const int> truth) {
  check_lengths(predicted.size(), truth.size(), "clustering_f1");
  const auto classes = clusters_of(truth);
  const auto clusters = clusters_of(predicted);
  if (classes.empty()) return 0.0;

  std::map<int, std::size_t> cluster_column;
  for (const auto& [label, members] : clusters) {
    cluster_column.emplace(label, cluster_column.size());
  }
  std::vector<std::vector<double>> overlap(classes.size(),
                                           std::vector<double>(clusters.size(), 0.0));
  std::size_t row = 0;
  for (const auto& [label, members] : classes) {
    for (const std::size_t i : members) {
      if (predicted[i] >= 0) overlap[row][cluster_column.at(predicted[i])] += 1.0;
    }
    ++row;
  }
  std::vector<double> cluster_sizes;
  for (const auto& [label, members] : clusters) cluster_sizes.push_back(static_cast<double>(members.size()));

  const auto match = max_weight_assignment(overlap);
  double sum = 0.0;
  row = 0;
  for (const auto& [label, members] : classes) {
    const int col = match[row];
    if (col >= 0) {
      const double hit = overlap[row][static_cast<std::size_t>(col)];
      const double size_sum =
          static_cast<double>(members.size()) + cluster_sizes[static_cast<std::size_t>(col)];
      sum += 2.0 * hit / size_sum;
    }
    ++row;
  }
  return sum / static_cast<double>(classes.size());
}

double data_ratio(std::span<const std::size_t> coreset_sizes,
                  std::span<const std::size_t> dataset_sizes) {
  const auto selected = std::accumulate(coreset_sizes.begin(), coreset_sizes.end(), std::size_t{0});
  const auto total = std::accumulate(dataset_sizes.begin(), dataset_sizes.end(), std::size_t{0});
  if (total == 0) fail(ErrorKind::kEmptyInput, "data_ratio over empty datasets");
  return static_cast<double>(selected) / static_cast<double>(total);
}

double trustworthiness(const Matrix& input, const Matrix& embedding, std::size_t k) {
  const std::size_t n = input.rows();
  check_lengths(n, embedding.rows(), "trustworthiness");
  if (k == 0 || 2 * k >= n) fail(ErrorKind::kDomain, "trustworthiness needs 0 < k < n / 2");

  auto ranking = [n](const Matrix& m, std::size_t i) {
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.emplace_back(squared_distance(m.row(i), m.row(j)), j);
    }
    std::sort(order.begin(), order.end());
    return order;
  };

  double penalty = 0.0;
  std::vector<std::size_t> input_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto in = ranking(input, i);
    for (std::size_t r = 0; r < in.size(); ++r) input_rank[in[r].second] = r + 1;
    const auto out = ranking(embedding, i);
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t rank = input_rank[out[r].second];
      if (rank > k) penalty += static_cast<double>(rank - k);
    }
  }
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  return 1.0 - 2.0 / (nd * kd * (2.0 * nd - 3.0 * kd - 1.0)) * penalty;
}

ClassificationScores classification_scores(std::span<const int> predicted,
                                           std::span<const int> truth) {
  check_lengths(predicted.size(), truth.size(), "classification_scores");
  if (truth.empty()) fail(ErrorKind::kEmptyInput, "no samples to score");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());

  std::map<int, std::size_t> tp, fp, fn;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) {
      ++correct;
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  double f1_sum = 0.0;
  for (const int c : classes) {
    const double denom = 2.0 * static_cast<double>(tp[c]) + static_cast<double>(fp[c] + fn[c]);
    if (denom > 0.0) f1_sum += 2.0 * static_cast<double>(tp[c]) / denom;
  }
  return {static_cast<double>(correct) / static_cast<double>(truth.size()),
          f1_sum / static_cast<double>(classes.size())};
}

}  // namespace fedcore
