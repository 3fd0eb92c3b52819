#include <limits>

#include "fedcore/cluster.hpp"
#include "fedcore/error.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {
namespace {

std::size_t closest_centroid(const Matrix& centroids, std::span<const double> point,
                             double* dist_out = nullptr) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c), point);
    if (d < best_dist) {
      best = c;
      best_dist = d;
    }
  }
  if (dist_out) *dist_out = best_dist;
  return best;
}

Matrix plus_plus_seeds(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = points.row(pick);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), src));
      total += nearest[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
      continue;
    }
    const double target = rng.uniform() * total;
    double running = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      running += nearest[i];
      if (running > target && nearest[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  const std::size_t n = points.rows();
  if (k == 0) fail(ErrorKind::kValidation, "k must be at least 1");
  if (n < k) fail(ErrorKind::kValidation, "k-means needs at least k points");

  Rng rng(seed);
  KMeansResult result;
  result.centroids = plus_plus_seeds(points, k, rng);
  result.labels.assign(n, k);  // sentinel: nothing assigned yet

  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      const std::size_t c = closest_centroid(result.centroids, points.row(i), &d);
      inertia += d;
      if (c != result.labels[i]) {
        result.labels[i] = c;
        changed = true;
      }
    }
    result.inertia_history.push_back(inertia);
    result.iterations = it + 1;
    if (!changed) break;

    Matrix sums(k, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = points.row(i);
      auto s = sums.row(result.labels[i]);
      for (std::size_t d = 0; d < r.size(); ++d) s[d] += r[d];
      ++counts[result.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      auto dst = result.centroids.row(c);
      const auto s = sums.row(c);
      for (std::size_t d = 0; d < s.size(); ++d) dst[d] = s[d] / static_cast<double>(counts[c]);
    }
  }
  return result;
}

}  // namespace fedcore
