#include "fedcore/privacy.hpp"

#include <cmath>

#include "fedcore/error.hpp"
#include "fedcore/matrix.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {

double calibrate_sigma(double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail(ErrorKind::kDomain, "epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::kDomain, "delta must lie in (0, 1)");
  return 2.0 * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

double DPConfig::resolved_sigma() const {
  return sigma ? *sigma : calibrate_sigma(epsilon, delta);
}

void DPConfig::validate() const {
  if (sigma) {
    if (!(*sigma >= 0.0) || !std::isfinite(*sigma)) {
      fail(ErrorKind::kValidation, "sigma must be a finite non-negative number");
    }
  } else if (enabled) {
    (void)calibrate_sigma(epsilon, delta);
  }
}

NoisedCentroid transform_centroid(std::span<const double> centroid, const DPConfig& config,
                                  Rng& rng) {
  if (!all_finite(centroid)) fail(ErrorKind::kValidation, "non-finite centroid");
  NoisedCentroid out;
  out.values.reserve(centroid.size());
  for (const double c : centroid) out.values.push_back(std::tanh(c));
  if (config.enabled) {
    const double sigma = config.resolved_sigma();
    for (double& v : out.values) v += sigma * rng.normal();
  }
  return out;
}

NoisedCentroid transform_centroid(std::span<const double> centroid, const DPConfig& config) {
  Rng rng(config.seed);
  return transform_centroid(centroid, config, rng);
}

}  // namespace fedcore
