#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fedcore/cluster.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace fedcore;
using testing::raised;

namespace {

oracle::Partition production(const Matrix& x, std::size_t mcs, std::optional<std::size_t> ms = {}) {
  return oracle::partition_of(hdbscan(x, {mcs, ms}).labels);
}

void check_invariants(const Matrix& x, const ClusteringResult& r, std::size_t mcs) {
  REQUIRE(r.labels.size() == x.rows());
  std::vector<std::size_t> seen(x.rows(), 0);
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    const auto& grp = r.groups[g];
    CHECK(!grp.member_indices.empty());
    CHECK(std::is_sorted(grp.member_indices.begin(), grp.member_indices.end()));
    if (x.rows() >= mcs) CHECK(grp.member_indices.size() >= mcs);
    for (const std::size_t i : grp.member_indices) {
      CHECK(r.labels[i] == static_cast<int>(g));
      ++seen[i];
    }
    // The centroid is the member mean, hence inside the members' bounding box.
    const auto mean = centroid_of(x, grp.member_indices);
    CHECK(mean == grp.centroid);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double lo = 1e300, hi = -1e300;
      for (const std::size_t i : grp.member_indices) {
        lo = std::min(lo, x(i, c));
        hi = std::max(hi, x(i, c));
      }
      CHECK(grp.centroid[c] >= lo - 1e-12);
      CHECK(grp.centroid[c] <= hi + 1e-12);
    }
  }
  for (std::size_t i = 0; i < x.rows(); ++i) {
    CHECK(seen[i] == (r.labels[i] >= 0 ? 1u : 0u));
    CHECK(r.labels[i] < static_cast<int>(r.groups.size()));
  }
  // Groups are numbered by their lowest member.
  for (std::size_t g = 1; g < r.groups.size(); ++g) {
    CHECK(r.groups[g - 1].member_indices.front() < r.groups[g].member_indices.front());
  }
}

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("two far pairs form two clusters") {
    const Matrix x{{0, 0}, {0, 1}, {100, 0}, {100, 1}};
    const auto r = hdbscan(x, {2, std::nullopt});
    CHECK(r.groups.size() == 2);
    CHECK(r.noise_count() == 0);
    CHECK(r.groups[0].member_indices == std::vector<std::size_t>{0, 1});
    CHECK(r.groups[1].member_indices == std::vector<std::size_t>{2, 3});
    CHECK(production(x, 2) == oracle::hdbscan(x, 2, 2));
  }

  TEST_CASE("single point and tiny inputs fall back to one group") {
    const auto one = hdbscan(Matrix{{3.0, 4.0}}, {5, std::nullopt});
    REQUIRE(one.groups.size() == 1);
    CHECK(one.groups[0].centroid == std::vector<double>{3.0, 4.0});
    const auto few = hdbscan(Matrix{{0, 0}, {9, 9}, {50, 50}}, {5, std::nullopt});
    CHECK(few.groups.size() == 1);
    CHECK(few.noise_count() == 0);
    CHECK(hdbscan(Matrix(0, 2), {5, std::nullopt}).groups.empty());
  }

  TEST_CASE("three separated blobs are recovered exactly") {
    Rng rng(2);
    const Matrix x = testing::blobs(3, 30, 2, 50.0, 0.5, rng);
    const auto r = hdbscan(x, {5, std::nullopt});
    REQUIRE(r.groups.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<std::size_t> expect(30);
      std::iota(expect.begin(), expect.end(), 30 * b);
      CHECK(r.groups[b].member_indices == expect);
    }
    check_invariants(x, r, 5);
  }

  TEST_CASE("identical points form one group") {
    const Matrix x(20, 2, 0.5);
    const auto r = hdbscan(x, {5, std::nullopt});
    CHECK(r.groups.size() == 1);
    CHECK(r.noise_count() == 0);
    CHECK(production(x, 5) == oracle::hdbscan(x, 5, 5));
  }

  TEST_CASE("matches the brute-force oracle on random instances") {
    Rng rng(101);
    for (int trial = 0; trial < 120; ++trial) {
      const Matrix x = testing::clustering_instance(rng);
      const std::size_t mcs = std::vector<std::size_t>{2, 3, 5}[trial % 3];
      const std::size_t ms = trial % 2 ? mcs : 1 + static_cast<std::size_t>(rng.below(4));
      const auto r = hdbscan(x, {mcs, ms});
      check_invariants(x, r, mcs);
      CHECK(oracle::partition_of(r.labels) == oracle::hdbscan(x, mcs, ms));
    }
  }

  TEST_CASE("row permutation permutes the partition") {
    // Equal mutual-reachability weights are broken by row index, so the
    // mapped partition must match exactly only when the tree has no ties.
    // Otherwise the permuted run must still follow the tie rules on its own
    // indices.
    Rng rng(103);
    int tie_free = 0;
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix x = testing::clustering_instance(rng);
      std::vector<std::size_t> perm(x.rows());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle(std::span<std::size_t>(perm), rng);
      const Matrix y = x.select_rows(perm);
      const auto base = production(x, 3);
      const auto moved = production(y, 3);
      CHECK(moved == oracle::hdbscan(y, 3, 3));

      const auto tree = mutual_reachability_mst(x, core_distances(x, 3));
      std::set<double> weights;
      for (const auto& e : tree) weights.insert(e.weight);
      if (weights.size() != tree.size()) continue;
      ++tie_free;
      oracle::Partition mapped;
      for (const auto& c : moved.clusters) {
        std::set<std::size_t> m;
        for (const auto i : c) m.insert(perm[i]);
        mapped.clusters.insert(m);
      }
      for (const auto i : moved.noise) mapped.noise.insert(perm[i]);
      CHECK(mapped == base);
    }
    CHECK(tie_free > 0);
  }

  TEST_CASE("mst is a spanning tree with minimal weight") {
    Rng rng(107);
    const Matrix x = testing::uniform_points(25, 2, 10.0, rng);
    const auto core = core_distances(x, 3);
    const auto tree = mutual_reachability_mst(x, core);
    CHECK(tree.size() == 24);
    double total = 0.0;
    for (const auto& e : tree) {
      CHECK(e.a < e.b);
      total += e.weight;
    }
    // Kruskal reference over all pairs.
    std::vector<MstEdge> all;
    for (std::size_t i = 0; i < 25; ++i) {
      for (std::size_t j = i + 1; j < 25; ++j) {
        all.push_back({i, j, std::max({core[i], core[j], distance(x.row(i), x.row(j))})});
      }
    }
    std::sort(all.begin(), all.end(), edge_before);
    std::vector<std::size_t> comp(25);
    std::iota(comp.begin(), comp.end(), std::size_t{0});
    double best = 0.0;
    for (const auto& e : all) {
      const auto ca = comp[e.a], cb = comp[e.b];
      if (ca == cb) continue;
      for (auto& c : comp) c = c == cb ? ca : c;
      best += e.weight;
    }
    CHECK(total == doctest::Approx(best).epsilon(1e-12));
  }

  TEST_CASE("core distance counts the point itself") {
    const Matrix x{{0}, {1}, {3}};
    CHECK(core_distances(x, 1) == std::vector<double>{0, 0, 0});
    CHECK(core_distances(x, 2) == std::vector<double>{1, 1, 2});
    CHECK(core_distances(x, 10) == std::vector<double>{3, 2, 3});
  }

  TEST_CASE("centroid examples") {
    const Matrix x{{0, 0}, {2, 0}, {1, 0}, {0.4, 0}};
    const std::vector<std::size_t> pair{0, 1};
    CHECK(centroid_of(x, pair) == std::vector<double>{1, 0});
    const std::vector<std::size_t> single{3};
    CHECK(centroid_of(x, single) == std::vector<double>{0.4, 0});
    const std::vector<std::size_t> trio{0, 2, 3};
    CHECK(centroid_of(x, trio)[0] == doctest::Approx(1.4 / 3.0).epsilon(1e-12));
    CHECK(raised([&] { centroid_of(x, std::vector<std::size_t>{}); }) == ErrorKind::kEmptyInput);
  }

  TEST_CASE("nearest member examples") {
    const Matrix x{{0, 0}, {2, 0}, {1, 0}, {0.4, 0}};
    const std::vector<double> mid{1, 0};
    CHECK(nearest_member(x, std::vector<std::size_t>{0, 1}, mid) == 0);
    const std::vector<double> target{1.4 / 3.0, 0};
    CHECK(nearest_member(x, std::vector<std::size_t>{0, 2, 3}, target) == 3);
    CHECK(nearest_member(x, std::vector<std::size_t>{2}, target) == 2);
    CHECK(raised([&] { nearest_member(x, std::vector<std::size_t>{}, target); }) == ErrorKind::kEmptyInput);
  }

  TEST_CASE("kmeans examples") {
    const Matrix two{{0, 0}, {5, 5}};
    const auto fit = kmeans(two, 2, 1);
    CHECK(fit.labels[0] != fit.labels[1]);
    CHECK(fit.centroids.row(fit.labels[0])[0] == 0.0);
    CHECK(fit.centroids.row(fit.labels[1])[0] == 5.0);

    Rng rng(5);
    std::vector<int> truth;
    const Matrix x = testing::blobs(2, 40, 3, 100.0, 1.0, rng, &truth);
    const auto km = kmeans(x, 2, 9);
    for (std::size_t b = 0; b < 2; ++b) {
      std::vector<std::size_t> members(40);
      std::iota(members.begin(), members.end(), 40 * b);
      const auto mean = centroid_of(x, members);
      const std::size_t label = km.labels[40 * b];
      for (const std::size_t i : members) CHECK(km.labels[i] == label);
      for (std::size_t c = 0; c < 3; ++c) CHECK(km.centroids(label, c) == doctest::Approx(mean[c]).epsilon(1e-9));
    }

    const auto one = kmeans(x, 1, 3);
    std::vector<std::size_t> everyone(x.rows());
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    const auto mean = centroid_of(x, everyone);
    for (std::size_t c = 0; c < 3; ++c) CHECK(one.centroids(0, c) == doctest::Approx(mean[c]).epsilon(1e-12));

    CHECK(raised([&] { kmeans(two, 3, 1); }).has_value());
  }

  TEST_CASE("kmeans inertia never increases and runs are reproducible") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix x = testing::uniform_points(80, 3, 1.0, rng);
      const auto a = kmeans(x, 6, trial);
      for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
        CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] + 1e-12);
      }
      const auto b = kmeans(x, 6, trial);
      CHECK(a.labels == b.labels);
      CHECK(a.centroids == b.centroids);
    }
  }

  TEST_CASE("config validation") {
    CHECK(raised([] { HdbscanConfig{1, std::nullopt}.validate(); }) == ErrorKind::kValidation);
    CHECK(raised([] { HdbscanConfig{2, 0}.validate(); }) == ErrorKind::kValidation);
    CHECK(HdbscanConfig{4, std::nullopt}.effective_min_samples() == 4);
  }
}
