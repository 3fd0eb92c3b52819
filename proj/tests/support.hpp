#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedcore/error.hpp"

#include "fedcore/matrix.hpp"
#include "fedcore/rng.hpp"

namespace testing {

using fedcore::Matrix;

/// n points uniform in [0, scale)^dim.
inline Matrix uniform_points(std::size_t n, std::size_t dim, double scale, fedcore::Rng& rng) {
  Matrix m(n, dim);
  for (double& x : m.data()) x = scale * rng.uniform();
  return m;
}

/// Isotropic Gaussian blobs laid out along the first axis, blob-major.
inline Matrix blobs(std::size_t count, std::size_t per_blob, std::size_t dim, double separation,
                    double stddev, fedcore::Rng& rng, std::vector<int>* labels = nullptr) {
  Matrix m(count * per_blob, dim);
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      const std::size_t r = b * per_blob + i;
      for (std::size_t c = 0; c < dim; ++c) {
        m(r, c) = (c == 0 ? separation * static_cast<double>(b) : 0.0) + stddev * rng.normal();
      }
      if (labels) labels->push_back(static_cast<int>(b));
    }
  }
  return m;
}

/// Random 2-D instance for clustering checks: a few Gaussian clumps of random
/// size and spread plus uniform background points, n in [5, 50].
inline Matrix clustering_instance(fedcore::Rng& rng) {
  const std::size_t n = 5 + static_cast<std::size_t>(rng.below(46));
  const std::size_t clumps = 1 + static_cast<std::size_t>(rng.below(4));
  Matrix centers = uniform_points(clumps, 2, 20.0, rng);
  Matrix m(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < 0.2) {
      m(i, 0) = 20.0 * rng.uniform();
      m(i, 1) = 20.0 * rng.uniform();
      continue;
    }
    const auto c = static_cast<std::size_t>(rng.below(clumps));
    const double spread = 0.2 + 1.5 * rng.uniform();
    m(i, 0) = centers(c, 0) + spread * rng.normal();
    m(i, 1) = centers(c, 1) + spread * rng.normal();
  }
  return m;
}

/// Kind of the fedcore::Error thrown by f, or nullopt when it returns normally.
template <class F>
std::optional<fedcore::ErrorKind> raised(F&& f) {
  try {
    f();
  } catch (const fedcore::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testing
