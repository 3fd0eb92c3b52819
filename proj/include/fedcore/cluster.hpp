#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedcore/matrix.hpp"

namespace fedcore {

struct HdbscanConfig {
  std::size_t min_cluster_size = 5;
  /// Neighbourhood size for core distances, counting the point itself.
  /// Defaults to min_cluster_size.
  std::optional<std::size_t> min_samples;

  std::size_t effective_min_samples() const noexcept {
    return min_samples.value_or(min_cluster_size);
  }
  void validate() const;
};

struct ClusterGroup {
  std::vector<std::size_t> member_indices;  // ascending
  std::vector<double> centroid;
};

struct ClusteringResult {
  std::vector<int> labels;  // -1 = noise
  std::vector<ClusterGroup> groups;

  std::size_t noise_count() const noexcept;
};

/// Core distance of each point: distance to its min_samples-th nearest point,
/// the point itself included (clamped to n).
std::vector<double> core_distances(const Matrix& points, std::size_t min_samples);

struct MstEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double weight = 0.0;
};

/// Strict total order used for every tie: (weight, lower endpoint, higher endpoint).
bool edge_before(const MstEdge& lhs, const MstEdge& rhs) noexcept;

/// Prim's algorithm on the dense mutual-reachability graph, edges returned in
/// insertion order.
std::vector<MstEdge> mutual_reachability_mst(const Matrix& points, std::span<const double> core);

/// HDBSCAN with excess-of-mass extraction. Groups are numbered by their lowest
/// member index. When n < min_cluster_size every point forms one group; when
/// the condensed tree has no cluster below the root, the root is kept as a
/// single cluster whose members are the points that persist to its largest
/// lambda and the rest are noise.
ClusteringResult hdbscan(const Matrix& points, const HdbscanConfig& config);

/// Arithmetic mean of the selected rows.
std::vector<double> centroid_of(const Matrix& points, std::span<const std::size_t> members);

/// Candidate closest to target in Euclidean distance; ties go to the lowest index.
std::size_t nearest_member(const Matrix& points, std::span<const std::size_t> candidates,
                           std::span<const double> target);

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  /// Within-cluster sum of squares at each assignment step.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
};

/// k-means++ seeding then Lloyd iterations until assignments stop changing.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 300);

}  // namespace fedcore
