#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fedcore {

class Rng;

struct DPConfig {
  bool enabled = false;
  double epsilon = 0.5;
  double delta = 1e-5;
  /// Explicit noise scale; calibrated from (epsilon, delta) when unset.
  std::optional<double> sigma;
  std::uint64_t seed = 0;

  double resolved_sigma() const;
  void validate() const;
};

struct NoisedCentroid {
  std::vector<double> values;
};

/// Smallest sigma meeting the Gaussian-mechanism bound for sensitivity 2:
/// 2 * sqrt(2 ln(1.25 / delta)) / epsilon. Both parameters must lie in (0, 1).
double calibrate_sigma(double epsilon, double delta);

/// Per-dimension tanh, then N(0, sigma^2) noise per dimension when enabled.
/// Draws come from `rng` so a client can stream several centroids.
NoisedCentroid transform_centroid(std::span<const double> centroid, const DPConfig& config,
                                  Rng& rng);
/// Same, with a fresh stream seeded from config.seed.
NoisedCentroid transform_centroid(std::span<const double> centroid, const DPConfig& config);

}  // namespace fedcore
