#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "fedcore/error.hpp"
#include "fedcore/reduce.hpp"
#include "quadtree.hpp"

namespace fedcore {
namespace {

constexpr double kEntropyTolerance = 1e-5;
constexpr int kMaxBisectionSteps = 200;

// Fills probabilities for one row and returns the precision that reaches the
// target entropy. `dist` are squared distances to the row's neighbors.
double calibrate_row(std::span<const double> dist, double target_entropy,
                     std::vector<double>& probs) {
  const double floor_dist = *std::min_element(dist.begin(), dist.end());
  double spread = 0.0;
  for (const double d : dist) spread += d - floor_dist;
  spread /= static_cast<double>(dist.size());

  double beta = spread > 0.0 ? 1.0 / spread : 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  probs.assign(dist.size(), 0.0);
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) {
      const double shifted = dist[j] - floor_dist;
      probs[j] = std::exp(-beta * shifted);
      sum += probs[j];
      weighted += shifted * probs[j];
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (double& p : probs) p /= sum;
    const double gap = entropy - target_entropy;
    if (std::abs(gap) < kEntropyTolerance) break;
    if (gap > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  return beta;
}

void require_embedding(const Matrix& embedding) {
  if (embedding.rows() < 2) fail(ErrorKind::kTooFewSamples, "embedding needs at least 2 points");
}

Matrix attraction(const Matrix& embedding, const SparseAffinities& p, double exaggeration) {
  const std::size_t k = embedding.cols();
  Matrix out(embedding.rows(), k);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto yi = embedding.row(i);
    auto fi = out.row(i);
    for (std::size_t e = p.row_offsets[i]; e < p.row_offsets[i + 1]; ++e) {
      const auto yj = embedding.row(p.columns[e]);
      double d2 = 0.0;
      for (std::size_t d = 0; d < k; ++d) d2 += (yi[d] - yj[d]) * (yi[d] - yj[d]);
      const double w = exaggeration * p.values[e] / (1.0 + d2);
      for (std::size_t d = 0; d < k; ++d) fi[d] += w * (yi[d] - yj[d]);
    }
  }
  return out;
}

Matrix combine(const Matrix& attract, const Repulsion& repulse) {
  Matrix grad(attract.rows(), attract.cols());
  const auto a = attract.data();
  const auto r = repulse.forces.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 4.0 * (a[i] - r[i] / repulse.normalizer);
  return grad;
}

}  // namespace

double effective_perplexity(double requested, std::size_t n) noexcept {
  const double cap = n > 0 ? std::floor(static_cast<double>(n - 1) / 3.0) : 0.0;
  return std::max(1.0, std::min(requested, cap));
}

double SparseAffinities::sum() const noexcept {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

double SparseAffinities::at(std::size_t i, std::size_t j) const noexcept {
  const auto begin = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
  const auto end = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - columns.begin())];
}

ConditionalAffinities tsne_conditional(const Matrix& features, double perplexity) {
  const std::size_t n = features.rows();
  if (n < 2) fail(ErrorKind::kTooFewSamples, "affinities need at least 2 samples");
  if (!(perplexity >= 1.0)) fail(ErrorKind::kValidation, "perplexity must be at least 1");
  bool all_same = true;
  for (std::size_t i = 1; i < n && all_same; ++i) {
    all_same = squared_distance(features.row(0), features.row(i)) == 0.0;
  }
  if (all_same) fail(ErrorKind::kDegenerateAffinity, "all samples are identical");

  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(3.0 * perplexity)), 1, n - 1);
  const double target = std::log(perplexity);

  ConditionalAffinities out;
  out.n = n;
  out.neighbors.resize(n);
  out.probabilities.resize(n);
  out.beta.resize(n);
  std::vector<std::pair<double, std::size_t>> row(n - 1);
  std::vector<double> dist(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row[m++] = {squared_distance(features.row(i), features.row(j)), j};
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    auto& nbrs = out.neighbors[i];
    nbrs.resize(k);
    for (std::size_t t = 0; t < k; ++t) {
      dist[t] = row[t].first;
      nbrs[t] = row[t].second;
    }
    out.beta[i] = calibrate_row(dist, target, out.probabilities[i]);
  }
  return out;
}

SparseAffinities symmetrize(const ConditionalAffinities& conditional) {
  const std::size_t n = conditional.n;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < conditional.neighbors[i].size(); ++t) {
      const std::size_t j = conditional.neighbors[i][t];
      const double p = conditional.probabilities[i][t];
      rows[i].emplace_back(j, p);
      rows[j].emplace_back(i, p);
    }
  }
  SparseAffinities out;
  out.n = n;
  out.row_offsets.push_back(0);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    for (std::size_t t = 0; t < r.size(); ++t) {
      const bool same_row_entry = out.columns.size() > out.row_offsets.back();
      if (same_row_entry && out.columns.back() == r[t].first) {
        out.values.back() += r[t].second;
      } else {
        out.columns.push_back(r[t].first);
        out.values.push_back(r[t].second);
      }
    }
    out.row_offsets.push_back(out.columns.size());
  }
  const double total = out.sum();
  for (double& v : out.values) v /= total;
  return out;
}

SparseAffinities tsne_affinities(const Matrix& features, double perplexity) {
  return symmetrize(tsne_conditional(features, perplexity));
}

Repulsion exact_repulsion(const Matrix& embedding) {
  require_embedding(embedding);
  const std::size_t n = embedding.rows();
  const std::size_t k = embedding.cols();
  Repulsion out{Matrix(n, k), 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = embedding.row(i);
    auto fi = out.forces.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto yj = embedding.row(j);
      const double q = 1.0 / (1.0 + squared_distance(yi, yj));
      out.normalizer += q;
      for (std::size_t d = 0; d < k; ++d) fi[d] += q * q * (yi[d] - yj[d]);
    }
  }
  return out;
}

Repulsion bh_repulsion(const Matrix& embedding, double theta) {
  require_embedding(embedding);
  if (embedding.cols() != 2) return exact_repulsion(embedding);
  const detail::QuadTree tree(embedding);
  Repulsion out{Matrix(embedding.rows(), 2), 0.0};
  for (std::size_t i = 0; i < embedding.rows(); ++i) {
    double fx = 0.0;
    double fy = 0.0;
    tree.accumulate(i, theta, fx, fy, out.normalizer);
    out.forces(i, 0) = fx;
    out.forces(i, 1) = fy;
  }
  return out;
}

Matrix exact_gradient(const Matrix& embedding, const SparseAffinities& affinities,
                      double exaggeration) {
  return combine(attraction(embedding, affinities, exaggeration), exact_repulsion(embedding));
}

Matrix bh_gradient(const Matrix& embedding, const SparseAffinities& affinities, double theta,
                   double exaggeration) {
  if (!(theta >= 0.0 && theta <= 1.0)) fail(ErrorKind::kValidation, "theta must be in [0, 1]");
  return combine(attraction(embedding, affinities, exaggeration),
                 bh_repulsion(embedding, theta));
}

double tsne_kl(const SparseAffinities& affinities, const Matrix& embedding) {
  const double z = exact_repulsion(embedding).normalizer;
  double kl = 0.0;
  for (std::size_t i = 0; i < affinities.n; ++i) {
    for (std::size_t e = affinities.row_offsets[i]; e < affinities.row_offsets[i + 1]; ++e) {
      const double p = affinities.values[e];
      if (p <= 0.0) continue;
      const double q =
          1.0 / (1.0 + squared_distance(embedding.row(i), embedding.row(affinities.columns[e]))) / z;
      kl += p * std::log(p / q);
    }
  }
  return kl;
}

TsneResult run_tsne(const Matrix& features, std::size_t output_dim, const TsneConfig& config,
                    bool track_kl) {
  const std::size_t n = features.rows();
  if (n < 2) fail(ErrorKind::kTooFewSamples, "t-SNE needs at least 2 samples");
  if (output_dim == 0) fail(ErrorKind::kValidation, "output_dim must be positive");

  // Re-origin on the first sample so a global translation of the input leaves
  // every downstream quantity bit-identical.
  Matrix shifted = features;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < features.cols(); ++d) shifted(i, d) = features(i, d) - features(0, d);
  }

  const SparseAffinities p = tsne_affinities(shifted, effective_perplexity(config.perplexity, n));

  Matrix y(n, output_dim);
  {
    const std::size_t k = std::min(output_dim, shifted.cols());
    const PcaFit pca = fit_pca(shifted, k);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += pca.projection(i, 0);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (pca.projection(i, 0) - mean) * (pca.projection(i, 0) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    const double scale = sd > 0.0 ? 1e-4 / sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) y(i, c) = pca.projection(i, c) * scale;
    }
  }

  const bool exact = n <= config.exact_threshold || config.theta == 0.0 || output_dim != 2;
  Matrix update(n, output_dim);
  Matrix gains(n, output_dim, 1.0);
  TsneResult result;
  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const Matrix grad =
        exact ? exact_gradient(y, p, exaggeration) : bh_gradient(y, p, config.theta, exaggeration);
    const double momentum =
        it < config.momentum_switch_iteration ? config.initial_momentum : config.final_momentum;
    // Momentum and gains built up under exaggeration overshoot once it is lifted.
    if (it == config.exaggeration_iterations || it == config.momentum_switch_iteration) {
      update = Matrix(n, output_dim);
      gains = Matrix(n, output_dim, 1.0);
    }
    auto g = grad.data();
    auto u = update.data();
    auto gn = gains.data();
    auto yv = y.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool flip = g[i] * u[i] < 0.0;
      gn[i] = std::max(flip ? gn[i] + 0.2 : gn[i] * 0.8, 0.01);
      u[i] = momentum * u[i] - config.learning_rate * gn[i] * g[i];
      yv[i] += u[i];
    }
    for (std::size_t c = 0; c < output_dim; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
    if (track_kl && it + 1 == config.exaggeration_iterations) {
      result.kl_after_exaggeration = tsne_kl(p, y);
    }
  }
  if (track_kl) {
    result.kl_final = tsne_kl(p, y);
    if (config.exaggeration_iterations >= config.iterations) {
      result.kl_after_exaggeration = result.kl_final;
    }
  }
  result.embedding = std::move(y);
  return result;
}

}  // namespace fedcore
