#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fedcore/metrics.hpp"
#include "fedcore/selection.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace fedcore;
using testing::raised;

namespace {

CentroidUpload upload(std::size_t client, std::size_t group, std::vector<double> v) {
  return {client, group, std::move(v)};
}

std::size_t selections(const InterSelection& s) {
  std::size_t total = 0;
  for (const auto& n : s.notices) total += n.selected_group_ids.size();
  return total;
}

// A client whose layers all carry the same blob structure, offset per layer.
ClientFeatures blob_client(std::size_t id, std::size_t blobs, std::size_t per_blob,
                           std::size_t layers, Rng& rng) {
  const std::size_t dim = 3;
  const Matrix base = testing::blobs(blobs, per_blob, dim, 20.0, 1.0, rng);
  ClientFeatures c{id, Matrix(base.rows(), layers * dim), layers, dim, std::nullopt};
  for (std::size_t i = 0; i < base.rows(); ++i) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t d = 0; d < dim; ++d) c.features(i, l * dim + d) = base(i, d) + 0.1 * rng.normal();
    }
  }
  return c;
}

SelectorConfig fast_config(SelectorKind kind) {
  SelectorConfig cfg;
  cfg.kind = kind;
  cfg.reducer.method = ReducerMethod::kTsne;
  cfg.reducer.tsne.perplexity = 10.0;
  cfg.reducer.tsne.iterations = 400;
  return cfg;
}

}  // namespace

TEST_SUITE("selection") {
  TEST_CASE("selector names round trip") {
    for (const auto k : {SelectorKind::kFedhds, SelectorKind::kFedhdsIntra, SelectorKind::kFeddb,
                         SelectorKind::kRandom, SelectorKind::kPerplexity, SelectorKind::kCoresetCent}) {
      CHECK(parse_selector_kind(to_string(k)) == k);
    }
    CHECK(raised([] { parse_selector_kind("kmeans"); }) == ErrorKind::kConfiguration);
  }

  TEST_CASE("intra selection recovers blobs") {
    Rng rng(1);
    std::vector<int> truth;
    const Matrix x = testing::blobs(10, 100, 2, 20.0, 1.0, rng, &truth);
    const auto s = intra_select(x, {5, std::nullopt});
    REQUIRE(s.clustering.groups.size() == 10);
    REQUIRE(s.centroids.size() == 10);
    for (std::size_t g = 0; g < 10; ++g) {
      const auto& m = s.clustering.groups[g].member_indices;
      REQUIRE(m.size() == 100);
      CHECK(m.front() == g * 100);
      CHECK(m.back() == g * 100 + 99);
      CHECK(s.centroids[g] == centroid_of(x, m));
    }
  }

  TEST_CASE("intra selection degenerate inputs") {
    const auto one = intra_select(Matrix{{3.0, -1.0}}, {5, std::nullopt});
    REQUIRE(one.clustering.groups.size() == 1);
    CHECK(one.centroids[0] == std::vector<double>{3.0, -1.0});
    const Matrix same(20, 2, 1.5);
    const auto dup = intra_select(same, {5, std::nullopt});
    CHECK(dup.clustering.groups.size() == 1);
    CHECK(dup.clustering.groups[0].member_indices.size() == 20);
    CHECK(oracle::hdbscan(same, 5, 5).clusters.size() == 1);
  }

  TEST_CASE("inter selection keeps one of a near-duplicate trio") {
    // Both trio edges have length 0.01, so the trio leaves the root together.
    const std::vector<CentroidUpload> ups{upload(1, 0, {0.0, 0.0}), upload(2, 0, {0.01, 0.0}),
                                          upload(3, 0, {0.0, 0.01}), upload(4, 0, {0.9, 0.9})};
    Matrix pts(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      pts(i, 0) = ups[i].values[0];
      pts(i, 1) = ups[i].values[1];
    }
    const auto ref = oracle::hdbscan(pts, 2, 2);
    CHECK(ref.clusters == std::set<std::set<std::size_t>>{{0, 1, 2}});
    CHECK(ref.noise == std::set<std::size_t>{3});

    const auto s = inter_select(ups, {2, std::nullopt});
    CHECK(s.second_level_clusters == 1);
    CHECK(s.second_level_noise == 1);
    CHECK(s.selected == 2);
    CHECK(selections(s) == 2);
    REQUIRE(s.notices.size() == 4);
    // Trio mean is (0.00333, 0.00333); client 1's upload is nearest.
    CHECK(s.notices[0].selected_group_ids == std::vector<std::size_t>{0});
    CHECK(s.notices[1].selected_group_ids.empty());
    CHECK(s.notices[2].selected_group_ids.empty());
    CHECK(s.notices[3].selected_group_ids == std::vector<std::size_t>{0});
  }

  TEST_CASE("inter selection agrees with brute-force clustering of uploads") {
    // A lopsided trio: its closest pair outlives the third point, which the
    // root rule then reports as noise.
    const std::vector<CentroidUpload> ups{upload(1, 0, {0.0, 0.0}), upload(2, 0, {0.01, 0.0}),
                                          upload(3, 0, {0.0, 0.012}), upload(4, 0, {0.9, 0.9})};
    Matrix pts(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      pts(i, 0) = ups[i].values[0];
      pts(i, 1) = ups[i].values[1];
    }
    const auto ref = oracle::hdbscan(pts, 2, 2);
    const auto s = inter_select(ups, {2, std::nullopt});
    CHECK(s.second_level_clusters == ref.clusters.size());
    CHECK(s.second_level_noise == ref.noise.size());
    CHECK(selections(s) == ref.clusters.size() + ref.noise.size());
  }

  TEST_CASE("inter selection degenerate inputs") {
    const std::vector<CentroidUpload> single{upload(5, 2, {1.0})};
    const auto s1 = inter_select(single, {2, std::nullopt});
    REQUIRE(s1.notices.size() == 1);
    CHECK(s1.notices[0].selected_group_ids == std::vector<std::size_t>{2});

    std::vector<CentroidUpload> same;
    for (std::size_t c : {4u, 2u, 7u, 3u}) same.push_back(upload(c, c % 2 ? 1 : 3, {0.5, 0.5}));
    const auto s2 = inter_select(same, {2, std::nullopt});
    CHECK(selections(s2) == 1);
    CHECK(s2.notices.front().client_id == 2);
    CHECK(s2.notices.front().selected_group_ids == std::vector<std::size_t>{3});

    CHECK(raised([] { inter_select({}, {2, std::nullopt}); }) == ErrorKind::kProtocol);
    const std::vector<CentroidUpload> twice{upload(1, 0, {0.0}), upload(1, 0, {1.0})};
    CHECK(raised([&] { inter_select(twice, {2, std::nullopt}); }) == ErrorKind::kProtocol);
  }

  TEST_CASE("coreset takes the member nearest the raw centroid") {
    const Matrix fused{{0.0, 0.0}, {1.0, 0.0}, {0.4, 0.0}};
    IntraSelection intra;
    intra.clustering.labels = {0, 0, 0};
    intra.clustering.groups = {{{0, 1, 2}, {0.4667, 0.0}}};
    intra.centroids = {{0.4667, 0.0}};
    const auto c = build_coreset(fused, intra, {9, {0}});
    CHECK(c.client_id == 9);
    CHECK(c.sample_indices == std::vector<std::size_t>{2});
    CHECK(build_coreset(fused, intra, {9, {}}).sample_indices.empty());
    CHECK(raised([&] { build_coreset(fused, intra, {9, {1}}); }) == ErrorKind::kProtocol);
  }

  TEST_CASE("coreset over a ten blob client has one sample per blob") {
    Rng rng(2);
    const Matrix x = testing::blobs(10, 100, 2, 20.0, 1.0, rng);
    const auto intra = intra_select(x, {5, std::nullopt});
    REQUIRE(intra.centroids.size() == 10);
    SelectionNotice all{0, std::vector<std::size_t>(10)};
    std::iota(all.selected_group_ids.begin(), all.selected_group_ids.end(), std::size_t{0});
    const auto c = build_coreset(x, intra, all);
    REQUIRE(c.sample_indices.size() == 10);
    for (std::size_t b = 0; b < 10; ++b) CHECK(c.sample_indices[b] / 100 == b);
    const std::vector<std::size_t> sizes{c.sample_indices.size()}, full{x.rows()};
    CHECK(data_ratio(sizes, full) == doctest::Approx(0.01));
  }

  TEST_CASE("random selection") {
    std::vector<std::size_t> all(10);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(random_select(10, 1.0, 3) == all);
    const auto a = random_select(10, 0.2, 3);
    CHECK(a.size() == 2);
    CHECK(a == random_select(10, 0.2, 3));
    CHECK(random_select(10, 0.25, 3).size() == 3);
  }

  TEST_CASE("random selection is uniform") {
    // Per-index frequencies over 200 seeds have sd 0.035, so they are pooled
    // over blocks of ten indices (sd 0.011) before the 0.05 bound.
    const std::size_t n = 10000;
    std::vector<int> hits(n, 0);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto s = random_select(n, 0.5, seed);
      CHECK(s.size() == 5000);
      CHECK(std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end());
      for (const auto i : s) ++hits[i];
    }
    double worst = 0.0;
    for (std::size_t b = 0; b < n; b += 10) {
      const int h = std::accumulate(hits.begin() + static_cast<long>(b), hits.begin() + static_cast<long>(b + 10), 0);
      worst = std::max(worst, std::abs(h / 2000.0 - 0.5));
    }
    CHECK(worst <= 0.05);
    const auto [lo, hi] = std::minmax_element(hits.begin(), hits.end());
    CHECK(*lo >= 60);
    CHECK(*hi <= 140);
  }

  TEST_CASE("perplexity selection") {
    const std::vector<double> s{0.5, 2.0, 1.0};
    CHECK(perplexity_select(s, 1.0 / 3.0) == std::vector<std::size_t>{0});
    CHECK(perplexity_select(s, 1.0) == std::vector<std::size_t>{0, 1, 2});
    const std::vector<double> flat(4, 1.0);
    CHECK(perplexity_select(flat, 0.5) == std::vector<std::size_t>{0, 1});
    CHECK(perplexity_select(std::vector<double>{3.0, 1.0, 2.0, 0.5}, 0.5) == std::vector<std::size_t>{1, 3});
    CHECK(raised([] { perplexity_select(std::nullopt, 0.5); }) == ErrorKind::kConfiguration);
  }

  TEST_CASE("centralized k-means baseline") {
    Rng rng(3);
    const Matrix x = testing::uniform_points(40, 3, 1.0, rng);
    std::vector<std::size_t> all(40);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(coreset_cent(x, 1.0, 1) == all);
    CHECK(coreset_cent(x, 0.2, 1) == coreset_cent(x, 0.2, 1));
    CHECK(coreset_cent(x, 0.2, 1).size() == 8);

    // n = 6 gives k = 2; ratio 1/3 keeps one sample per blob.
    const Matrix two{{0.0, 0.0}, {1.0, 0.0}, {0.4, 0.0}, {100.0, 0.0}, {101.0, 0.0}, {100.9, 0.0}};
    CHECK(coreset_cent(two, 1.0 / 3.0, 4) == std::vector<std::size_t>{2, 5});
  }

  TEST_CASE("fuse degenerate clients to zeros") {
    ReducerConfig cfg;
    const Matrix one{{1.0, 2.0, 3.0}};
    const auto f1 = fuse(one, cfg);
    CHECK(f1.rows() == 1);
    CHECK(f1.cols() == 2);
    CHECK(f1(0, 0) == 0.0);
    const Matrix same(7, 3, 2.0);
    const auto f2 = fuse(same, cfg);
    CHECK(std::all_of(f2.data().begin(), f2.data().end(), [](double v) { return v == 0.0; }));
  }

  TEST_CASE("feddb collapses to intra-only with one layer") {
    Rng rng(5);
    std::vector<ClientFeatures> clients;
    for (std::size_t c = 0; c < 3; ++c) clients.push_back(blob_client(c, 3, 20, 1, rng));
    std::vector<const ClientFeatures*> ptrs;
    for (const auto& c : clients) ptrs.push_back(&c);
    const auto a = select_round(ptrs, fast_config(SelectorKind::kFeddb), 0, 77);
    const auto b = select_round(ptrs, fast_config(SelectorKind::kFedhdsIntra), 0, 77);
    REQUIRE(a.clients.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.clients[i].coreset == b.clients[i].coreset);
      CHECK(!a.clients[i].coreset.empty());
    }
  }

  TEST_CASE("protocol invariants over random rounds") {
    Rng rng(6);
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<ClientFeatures> clients;
      const std::size_t m = 2 + rng.below(4);
      for (std::size_t c = 0; c < m; ++c) {
        clients.push_back(blob_client(10 + c, 1 + rng.below(4), 10 + rng.below(20), 2, rng));
      }
      std::vector<const ClientFeatures*> ptrs;
      for (const auto& c : clients) ptrs.push_back(&c);
      auto cfg = fast_config(SelectorKind::kFedhds);
      const auto full = select_round(ptrs, cfg, 3, 100 + trial);
      cfg.kind = SelectorKind::kFedhdsIntra;
      const auto intra = select_round(ptrs, cfg, 3, 100 + trial);

      std::size_t total = 0;
      std::map<std::size_t, std::set<std::size_t>> uploaded;
      for (const auto& u : full.uploads) CHECK(uploaded[u.client_id].insert(u.group_id).second);
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (const auto& n : full.notices) {
        for (const auto g : n.selected_group_ids) {
          CHECK(uploaded[n.client_id].count(g) == 1);
          CHECK(seen.insert({n.client_id, g}).second);
          ++total;
        }
      }
      CHECK(total == full.selected);
      CHECK(total == full.second_level_clusters + full.second_level_noise);
      for (std::size_t i = 0; i < m; ++i) {
        const auto& cs = full.clients[i];
        CHECK(cs.coreset.size() <= intra.clients[i].coreset.size());
        CHECK(cs.labels == intra.clients[i].labels);
        CHECK(std::is_sorted(cs.coreset.begin(), cs.coreset.end()));
        for (const auto s : cs.coreset) CHECK(s < cs.dataset_size);
      }
    }
  }

  TEST_CASE("intra grouping is scale invariant") {
    Rng rng(8);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
      const Matrix x = testing::clustering_instance(rng);
      const auto base = intra_select(x, {5, std::nullopt});
      if (oracle::partition_of(base.clustering.labels) != oracle::hdbscan(x, 5, 5)) continue;
      ++checked;
      for (const double s : {0.25, 2.0, 8.0}) {
        Matrix y = x;
        for (double& v : y.data()) v *= s;
        const auto scaled = intra_select(y, {5, std::nullopt});
        CHECK(scaled.clustering.labels == base.clustering.labels);
      }
    }
    CHECK(checked > 30);
  }

  TEST_CASE("selection is deterministic") {
    Rng rng(9);
    std::vector<ClientFeatures> clients;
    for (std::size_t c = 0; c < 3; ++c) clients.push_back(blob_client(c, 2, 15, 2, rng));
    std::vector<const ClientFeatures*> ptrs;
    for (const auto& c : clients) ptrs.push_back(&c);
    auto cfg = fast_config(SelectorKind::kFedhds);
    cfg.privacy.enabled = true;
    cfg.privacy.sigma = 0.1;
    const auto a = select_round(ptrs, cfg, 1, 5);
    const auto b = select_round(ptrs, cfg, 1, 5);
    REQUIRE(a.uploads.size() == b.uploads.size());
    for (std::size_t i = 0; i < a.uploads.size(); ++i) CHECK(a.uploads[i].values == b.uploads[i].values);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.clients[i].coreset == b.clients[i].coreset);
  }
}
