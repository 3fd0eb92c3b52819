#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "fedcore/matrix.hpp"

namespace fedcore::detail {

/// Point-region quadtree over a 2-D embedding, storing per-cell point counts
/// and centers of mass for Barnes-Hut summarization.
class QuadTree {
 public:
  explicit QuadTree(const Matrix& points);

  /// Adds the repulsion on point `index` to (fx, fy) and its q-sum to z.
  void accumulate(std::size_t index, double theta, double& fx, double& fy, double& z) const;

 private:
  struct Cell {
    double cx = 0.0;
    double cy = 0.0;
    double half = 0.0;
    double sum_x = 0.0;
    double sum_y = 0.0;
    std::size_t count = 0;
    int first_child = -1;  // four consecutive cells
    int first_point = -1;  // leaf points, chained through next_
  };

  static constexpr int kMaxDepth = 48;

  void insert(int cell, std::size_t index, int depth);
  void subdivide(int cell);
  int child_for(const Cell& cell, double x, double y) const noexcept;

  // Compact copy of what the traversal reads, built after all inserts.
  struct Node {
    double com_x;
    double com_y;
    double cx;
    double cy;
    double half;
    double width2;  // squared side length
    double count;
    int first_child;
    int first_point;
  };

  const Matrix& points_;
  std::vector<Cell> cells_;
  std::vector<Node> nodes_;
  std::vector<int> next_;
};

}  // namespace fedcore::detail
