#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedcore/cluster.hpp"
#include "fedcore/error.hpp"

namespace fedcore {
namespace {

struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

// Single-linkage dendrogram: nodes [0, n) are points, node n + k is merge k.
class Dendrogram {
 public:
  Dendrogram(std::size_t n, std::vector<MstEdge> edges) : n_(n) {
    std::sort(edges.begin(), edges.end(), edge_before);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::vector<std::size_t> top(n);
    std::iota(top.begin(), top.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
      }
      return x;
    };
    merges_.reserve(edges.size());
    for (const auto& e : edges) {
      const std::size_t ra = find(e.a);
      const std::size_t rb = find(e.b);
      const std::size_t left = top[ra];
      const std::size_t right = top[rb];
      merges_.push_back({left, right, e.weight, size(left) + size(right)});
      parent[rb] = ra;
      top[ra] = n_ + merges_.size() - 1;
    }
  }

  std::size_t root() const noexcept { return n_ + merges_.size() - 1; }
  bool is_point(std::size_t node) const noexcept { return node < n_; }
  const Merge& merge(std::size_t node) const { return merges_[node - n_]; }
  std::size_t size(std::size_t node) const { return is_point(node) ? 1 : merge(node).size; }

  void collect_points(std::size_t node, std::vector<std::size_t>& out) const {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      if (is_point(cur)) {
        out.push_back(cur);
      } else {
        stack.push_back(merge(cur).right);
        stack.push_back(merge(cur).left);
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<Merge> merges_;
};

struct CondensedCluster {
  int parent = -1;
  double birth = 0.0;
  std::size_t size = 0;
  std::vector<int> children;
  std::vector<std::pair<std::size_t, double>> departed;  // (point, lambda)
};

double lambda_of(double distance) noexcept {
  return distance > 0.0 ? 1.0 / distance : std::numeric_limits<double>::infinity();
}

// lambda - birth, with inf - inf read as zero persistence.
double excess(double lambda, double birth) noexcept {
  return lambda == birth ? 0.0 : lambda - birth;
}

std::vector<CondensedCluster> condense(const Dendrogram& tree, std::size_t min_cluster_size) {
  std::vector<CondensedCluster> clusters(1);
  clusters[0].size = tree.size(tree.root());
  std::vector<std::pair<std::size_t, int>> work{{tree.root(), 0}};
  std::vector<std::size_t> points;
  while (!work.empty()) {
    const auto [node, cluster] = work.back();
    work.pop_back();
    const Merge& m = tree.merge(node);
    const double lambda = lambda_of(m.distance);
    const bool left_big = tree.size(m.left) >= min_cluster_size;
    const bool right_big = tree.size(m.right) >= min_cluster_size;
    auto depart = [&](std::size_t subtree) {
      points.clear();
      tree.collect_points(subtree, points);
      for (const std::size_t p : points) clusters[cluster].departed.emplace_back(p, lambda);
    };
    if (left_big && right_big) {
      for (const std::size_t child : {m.left, m.right}) {
        CondensedCluster c;
        c.parent = cluster;
        c.birth = lambda;
        c.size = tree.size(child);
        clusters.push_back(std::move(c));
        const int id = static_cast<int>(clusters.size() - 1);
        clusters[cluster].children.push_back(id);
        work.emplace_back(child, id);
      }
    } else if (!left_big && !right_big) {
      depart(m.left);
      depart(m.right);
    } else if (left_big) {
      depart(m.right);
      work.emplace_back(m.left, cluster);
    } else {
      depart(m.left);
      work.emplace_back(m.right, cluster);
    }
  }
  return clusters;
}

std::vector<bool> excess_of_mass(const std::vector<CondensedCluster>& clusters) {
  const std::size_t count = clusters.size();
  std::vector<double> stability(count, 0.0);
  for (std::size_t c = 0; c < count; ++c) {
    const double birth = clusters[c].birth;
    for (const auto& [point, lambda] : clusters[c].departed) stability[c] += excess(lambda, birth);
    for (const int child : clusters[c].children) {
      stability[c] += excess(clusters[child].birth, birth) * static_cast<double>(clusters[child].size);
    }
  }
  std::vector<bool> selected(count, false);
  auto deselect_below = [&](std::size_t c) {
    std::vector<int> stack(clusters[c].children.begin(), clusters[c].children.end());
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      selected[cur] = false;
      stack.insert(stack.end(), clusters[cur].children.begin(), clusters[cur].children.end());
    }
  };
  // Children always carry larger ids than their parent; the root is never a candidate.
  for (std::size_t c = count; c-- > 1;) {
    if (clusters[c].children.empty()) {
      selected[c] = true;
      continue;
    }
    double subtree = 0.0;
    for (const int child : clusters[c].children) subtree += stability[child];
    if (subtree > stability[c]) {
      stability[c] = subtree;
    } else {
      selected[c] = true;
      deselect_below(c);
    }
  }
  return selected;
}

ClusteringResult single_group(const Matrix& points) {
  ClusteringResult result;
  result.labels.assign(points.rows(), 0);
  ClusterGroup group;
  group.member_indices.resize(points.rows());
  std::iota(group.member_indices.begin(), group.member_indices.end(), std::size_t{0});
  group.centroid = centroid_of(points, group.member_indices);
  result.groups.push_back(std::move(group));
  return result;
}

}  // namespace

void HdbscanConfig::validate() const {
  if (min_cluster_size < 2) fail(ErrorKind::kValidation, "min_cluster_size must be at least 2");
  if (min_samples && *min_samples < 1) fail(ErrorKind::kValidation, "min_samples must be at least 1");
}

std::size_t ClusteringResult::noise_count() const noexcept {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
}

bool edge_before(const MstEdge& lhs, const MstEdge& rhs) noexcept {
  if (lhs.weight != rhs.weight) return lhs.weight < rhs.weight;
  if (lhs.a != rhs.a) return lhs.a < rhs.a;
  return lhs.b < rhs.b;
}

std::vector<double> core_distances(const Matrix& points, std::size_t min_samples) {
  const std::size_t n = points.rows();
  if (n == 0) return {};
  const std::size_t k = std::clamp<std::size_t>(min_samples, 1, n);
  std::vector<double> core(n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = distance(points.row(i), points.row(j));
    row[i] = 0.0;
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  return core;
}

std::vector<MstEdge> mutual_reachability_mst(const Matrix& points, std::span<const double> core) {
  const std::size_t n = points.rows();
  std::vector<MstEdge> tree;
  if (n < 2) return tree;
  tree.reserve(n - 1);
  auto reach = [&](std::size_t u, std::size_t v) {
    return MstEdge{std::min(u, v), std::max(u, v),
                   std::max({core[u], core[v], distance(points.row(u), points.row(v))})};
  };
  std::vector<bool> in_tree(n, false);
  std::vector<MstEdge> best(n);
  in_tree[0] = true;
  for (std::size_t v = 1; v < n; ++v) best[v] = reach(0, v);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (pick == n || edge_before(best[v], best[pick])) pick = v;
    }
    in_tree[pick] = true;
    tree.push_back(best[pick]);
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const MstEdge candidate = reach(pick, v);
      if (edge_before(candidate, best[v])) best[v] = candidate;
    }
  }
  return tree;
}

ClusteringResult hdbscan(const Matrix& points, const HdbscanConfig& config) {
  config.validate();
  const std::size_t n = points.rows();
  if (!all_finite(points.data())) fail(ErrorKind::kValidation, "non-finite point");
  if (n == 0) return {};
  if (n < config.min_cluster_size) return single_group(points);

  const auto core = core_distances(points, config.effective_min_samples());
  const Dendrogram tree(n, mutual_reachability_mst(points, core));
  const auto clusters = condense(tree, config.min_cluster_size);
  const auto selected = excess_of_mass(clusters);

  std::vector<int> owner(n, -1);
  if (clusters.size() == 1) {
    double top = -1.0;
    for (const auto& [point, lambda] : clusters[0].departed) top = std::max(top, lambda);
    for (const auto& [point, lambda] : clusters[0].departed) {
      if (lambda == top) owner[point] = 0;
    }
  } else {
    std::vector<int> anchor(clusters.size(), -1);
    for (std::size_t c = 1; c < clusters.size(); ++c) {
      anchor[c] = selected[c] ? static_cast<int>(c) : anchor[static_cast<std::size_t>(clusters[c].parent)];
    }
    for (std::size_t c = 1; c < clusters.size(); ++c) {
      for (const auto& [point, lambda] : clusters[c].departed) owner[point] = anchor[c];
    }
  }

  // Number the groups by their lowest member index.
  std::vector<int> relabel(clusters.size(), -1);
  ClusteringResult result;
  result.labels.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = owner[i];
    if (c < 0) continue;
    if (relabel[c] < 0) {
      relabel[c] = static_cast<int>(result.groups.size());
      result.groups.emplace_back();
    }
    result.labels[i] = relabel[c];
    result.groups[relabel[c]].member_indices.push_back(i);
  }
  for (auto& g : result.groups) g.centroid = centroid_of(points, g.member_indices);
  return result;
}

}  // namespace fedcore
