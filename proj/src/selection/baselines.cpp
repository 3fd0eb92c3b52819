#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcore/error.hpp"
#include "fedcore/rng.hpp"
#include "fedcore/selection.hpp"

namespace fedcore {
namespace {

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) fail(ErrorKind::kValidation, "ratio must lie in (0, 1]");
}

std::size_t kept_count(std::size_t n, double ratio) {
  const auto m = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
  return std::min(m, n);
}

}  // namespace

std::vector<std::size_t> random_select(std::size_t n, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  const std::size_t m = kept_count(n, ratio);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first m slots end up a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> perplexity_select(std::optional<std::span<const double>> scores,
                                           double ratio) {
  if (!scores) fail(ErrorKind::kConfiguration, "perplexity selector needs perplexity scores");
  check_ratio(ratio);
  const auto& s = *scores;
  for (const double x : s) {
    if (!(x > 0.0) || !std::isfinite(x)) fail(ErrorKind::kValidation, "perplexity must be positive");
  }
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  idx.resize(kept_count(s.size(), ratio));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> coreset_cent(const Matrix& pooled, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  const std::size_t n = pooled.rows();
  if (n == 0) return {};
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n)))), 1, n);
  const KMeansResult km = kmeans(pooled, k, seed);

  std::vector<double> dist(n);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = distance(pooled.row(i), km.centroids.row(km.labels[i]));
    members[km.labels[i]].push_back(i);
  }
  auto closer = [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  };

  std::vector<char> offered(n, 0);
  for (auto& m : members) {
    if (m.empty()) continue;
    std::sort(m.begin(), m.end(), closer);
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(m.size()))));
    for (std::size_t r = 0; r < std::min(take, m.size()); ++r) offered[m[r]] = 1;
  }

  std::vector<std::size_t> in, out;
  for (std::size_t i = 0; i < n; ++i) (offered[i] ? in : out).push_back(i);
  std::sort(in.begin(), in.end(), closer);
  std::sort(out.begin(), out.end(), closer);
  const std::size_t target = kept_count(n, ratio);
  if (in.size() > target) in.resize(target);
  for (std::size_t r = 0; in.size() < target; ++r) in.push_back(out[r]);
  std::sort(in.begin(), in.end());
  return in;
}

}  // namespace fedcore
