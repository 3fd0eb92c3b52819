#include <cmath>

#include "doctest.h"
#include "fedcore/metrics.hpp"
#include "fedcore/reduce.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace fedcore;
using testing::raised;

namespace {

std::vector<std::vector<double>> dense(const SparseAffinities& p) {
  std::vector<std::vector<double>> out(p.n, std::vector<double>(p.n, 0.0));
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) out[i][p.columns[k]] = p.values[k];
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

TsneConfig fast_tsne() {
  TsneConfig c;
  c.iterations = 500;
  return c;
}

}  // namespace

TEST_SUITE("reduce") {
  TEST_CASE("every reducer returns n x k finite output") {
    Rng rng(1);
    const Matrix x = testing::uniform_points(40, 6, 1.0, rng);
    for (const auto method : {ReducerMethod::kTsne, ReducerMethod::kPca, ReducerMethod::kKpca}) {
      for (const std::size_t k : {1u, 2u, 3u}) {
        ReducerConfig cfg;
        cfg.method = method;
        cfg.output_dim = k;
        cfg.tsne = fast_tsne();
        const Matrix y = reduce(x, cfg);
        CHECK(y.rows() == 40);
        CHECK(y.cols() == k);
        CHECK(all_finite(y.data()));
      }
    }
  }

  TEST_CASE("reduce rejects bad input") {
    ReducerConfig cfg;
    CHECK(raised([&] { reduce(Matrix{{1.0, 2.0}}, cfg); }) == ErrorKind::kTooFewSamples);
    CHECK(raised([&] { reduce(Matrix{{1.0, NAN}, {0.0, 1.0}}, cfg); }) == ErrorKind::kValidation);
    cfg.tsne.theta = 1.5;
    CHECK(raised([&] { reduce(Matrix{{1.0}, {2.0}}, cfg); }) == ErrorKind::kValidation);
    cfg = {};
    cfg.output_dim = 0;
    CHECK(raised([&] { cfg.validate(); }) == ErrorKind::kValidation);
  }

  TEST_CASE("pca on collinear points is exact with one component") {
    Matrix x(0, 3);
    for (const double t : {-2.0, -0.5, 0.0, 1.0, 3.5}) x.append_row(std::vector<double>{1 + 2 * t, -t, 0.5 * t + 4});
    const PcaFit fit = fit_pca(x, 1);
    CHECK(fit.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
    const Matrix back = fit.reconstruct();
    CHECK(max_abs_diff(back, x) < 1e-9);
  }

  TEST_CASE("pca components are orthonormal and never add variance") {
    Rng rng(3);
    const Matrix x = testing::uniform_points(30, 5, 2.0, rng);
    const PcaFit fit = fit_pca(x, 3);
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        double dot = 0.0;
        for (std::size_t c = 0; c < 5; ++c) dot += fit.components(a, c) * fit.components(b, c);
        CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
      }
    }
    auto total_variance = [](const Matrix& m) {
      double v = 0.0;
      for (std::size_t c = 0; c < m.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
        mean /= static_cast<double>(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) v += (m(r, c) - mean) * (m(r, c) - mean);
      }
      return v;
    };
    CHECK(total_variance(fit.reconstruct()) <= total_variance(x) + 1e-9);
  }

  TEST_CASE("kpca gamma must be positive") {
    ReducerConfig cfg;
    cfg.method = ReducerMethod::kKpca;
    cfg.kpca.gamma = 0.0;
    CHECK(raised([&] { cfg.validate(); }) == ErrorKind::kValidation);
  }

  TEST_CASE("effective perplexity caps small inputs") {
    CHECK(effective_perplexity(30, 1000) == 30);
    CHECK(effective_perplexity(30, 31) == 10);
    CHECK(effective_perplexity(30, 3) == 1);
    CHECK(effective_perplexity(5, 2) == 1);
  }

  TEST_CASE("affinities are non-negative, symmetric and sum to one") {
    Rng rng(5);
    const Matrix x = testing::uniform_points(60, 4, 1.0, rng);
    const auto p = tsne_affinities(x, 10);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
    const auto d = dense(p);
    for (std::size_t i = 0; i < 60; ++i) {
      for (std::size_t j = 0; j < 60; ++j) {
        CHECK(d[i][j] >= 0.0);
        CHECK(d[i][j] == doctest::Approx(d[j][i]).epsilon(1e-15));
        CHECK(p.at(i, j) == d[i][j]);
      }
    }
  }

  TEST_CASE("equidistant points get equal conditionals") {
    // Unit basis vectors: pairwise squared distances are exactly 2.
    const Matrix x{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    const auto c = tsne_conditional(x, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(c.probabilities[i].size() == 2);
      CHECK(c.probabilities[i][0] == doctest::Approx(c.probabilities[i][1]).epsilon(1e-12));
    }
  }

  TEST_CASE("conditional rows hit the target perplexity") {
    Rng rng(7);
    const Matrix x = testing::uniform_points(50, 5, 1.0, rng);
    for (const double perplexity : {2.0, 5.0, 10.0, 16.0}) {
      const auto c = tsne_conditional(x, perplexity);
      for (std::size_t i = 0; i < 50; ++i) {
        CHECK(std::abs(oracle::perplexity_of(c.probabilities[i]) - perplexity) <= 1e-3);
      }
    }
  }

  TEST_CASE("identical inputs are a degenerate affinity") {
    const Matrix x(10, 3, 1.25);
    CHECK(raised([&] { tsne_affinities(x, 3); }) == ErrorKind::kDegenerateAffinity);
  }

  TEST_CASE("theta zero equals the exact gradient") {
    Rng rng(11);
    const Matrix x = testing::uniform_points(50, 5, 1.0, rng);
    const auto p = tsne_affinities(x, 10);
    const Matrix y = testing::uniform_points(50, 2, 3.0, rng);
    const Matrix exact = exact_gradient(y, p);
    CHECK(max_abs_diff(bh_gradient(y, p, 0.0), exact) <= 1e-10);
    CHECK(max_abs_diff(oracle::tsne_gradient(y, dense(p)), exact) <= 1e-10);
  }

  TEST_CASE("two symmetric points feel opposite gradients") {
    const Matrix x{{0.0, 0.0}, {1.0, 1.0}};
    const auto p = tsne_affinities(x, 1);
    const Matrix y{{-0.5, 0.25}, {0.5, -0.25}};
    for (const double theta : {0.0, 0.5}) {
      const Matrix g = bh_gradient(y, p, theta);
      CHECK(g(0, 0) == doctest::Approx(-g(1, 0)).epsilon(1e-14));
      CHECK(g(0, 1) == doctest::Approx(-g(1, 1)).epsilon(1e-14));
    }
  }

  TEST_CASE("barnes-hut repulsion stays within five percent") {
    Rng rng(13);
    const Matrix y = testing::blobs(3, 100, 2, 8.0, 1.0, rng);
    const Repulsion exact = exact_repulsion(y);
    const Repulsion approx = bh_repulsion(y, 0.5);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < y.data().size(); ++i) {
      const double e = exact.forces.data()[i] / exact.normalizer;
      const double a = approx.forces.data()[i] / approx.normalizer;
      diff += (a - e) * (a - e);
      norm += e * e;
    }
    CHECK(std::sqrt(diff / norm) <= 0.05);
    CHECK(std::abs(approx.normalizer - exact.normalizer) / exact.normalizer <= 0.05);
  }

  TEST_CASE("three blobs embed trustworthily and KL descends") {
    // 3-D blobs: with 10-D isotropic noise the within-blob neighbor order is
    // mostly noise and even reference implementations hover around 0.95.
    Rng rng(17);
    const Matrix x = testing::blobs(3, 30, 3, 20.0, 1.0, rng);
    const TsneResult r = run_tsne(x, 2, TsneConfig{}, true);
    CHECK(trustworthiness(x, r.embedding, 5) >= 0.95);
    CHECK(oracle::trustworthiness(x, r.embedding, 5) == doctest::Approx(trustworthiness(x, r.embedding, 5)).epsilon(1e-12));
    CHECK(r.kl_final <= r.kl_after_exaggeration);
  }

  TEST_CASE("t-SNE is deterministic and translation invariant") {
    Matrix x(0, 3);
    Rng rng(19);
    for (int i = 0; i < 80; ++i) {
      std::vector<double> row(3);
      for (double& v : row) v = static_cast<double>(rng.below(64)) / 8.0;
      x.append_row(row);
    }
    Matrix shifted = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      shifted(r, 0) += 16.0;
      shifted(r, 1) -= 4.5;
      shifted(r, 2) += 0.25;
    }
    ReducerConfig cfg;
    cfg.tsne = fast_tsne();
    cfg.seed = 3;
    const Matrix a = reduce(x, cfg);
    CHECK(reduce(x, cfg) == a);
    CHECK(reduce(shifted, cfg) == a);
  }

  TEST_CASE("k other than two uses the exact gradient") {
    Rng rng(23);
    const Matrix x = testing::uniform_points(20, 4, 1.0, rng);
    const auto p = tsne_affinities(x, 5);
    const Matrix y = testing::uniform_points(20, 3, 1.0, rng);
    CHECK(bh_gradient(y, p, 0.5) == exact_gradient(y, p));
  }
}
