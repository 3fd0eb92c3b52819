#include <cmath>
#include <limits>

#include "fedcore/cluster.hpp"
#include "fedcore/error.hpp"

namespace fedcore {

std::vector<double> centroid_of(const Matrix& points, std::span<const std::size_t> members) {
  if (members.empty()) fail(ErrorKind::kEmptyInput, "centroid of an empty group");
  std::vector<double> mean(points.cols(), 0.0);
  for (const std::size_t m : members) {
    const auto r = points.row(m);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += r[d];
  }
  for (double& v : mean) v /= static_cast<double>(members.size());
  return mean;
}

std::size_t nearest_member(const Matrix& points, std::span<const std::size_t> candidates,
                           std::span<const double> target) {
  if (candidates.empty()) fail(ErrorKind::kEmptyInput, "no candidates to choose from");
  if (target.size() != points.cols()) {
    fail(ErrorKind::kDimensionMismatch, "target dimension does not match points");
  }
  std::size_t best = candidates.front();
  double best_dist = std::numeric_limits<double>::infinity();
  for (const std::size_t c : candidates) {
    const double d = squared_distance(points.row(c), target);
    if (d < best_dist || (d == best_dist && c < best)) {
      best = c;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace fedcore
