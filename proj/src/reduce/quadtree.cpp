#include "quadtree.hpp"

#include <algorithm>
#include <cmath>

namespace fedcore::detail {

QuadTree::QuadTree(const Matrix& points) : points_(points) {
  double min_x = points(0, 0);
  double max_x = min_x;
  double min_y = points(0, 1);
  double max_y = min_y;
  for (std::size_t i = 1; i < points.rows(); ++i) {
    min_x = std::min(min_x, points(i, 0));
    max_x = std::max(max_x, points(i, 0));
    min_y = std::min(min_y, points(i, 1));
    max_y = std::max(max_y, points(i, 1));
  }
  Cell root;
  root.cx = 0.5 * (min_x + max_x);
  root.cy = 0.5 * (min_y + max_y);
  root.half = 0.5 * std::max(max_x - min_x, max_y - min_y) * (1.0 + 1e-9) + 1e-12;
  cells_.reserve(4 * points.rows() + 1);
  next_.assign(points.rows(), -1);
  cells_.push_back(std::move(root));
  for (std::size_t i = 0; i < points.rows(); ++i) insert(0, i, 0);
  nodes_.reserve(cells_.size());
  for (const Cell& c : cells_) {
    const double count = static_cast<double>(c.count);
    nodes_.push_back({c.count ? c.sum_x / count : 0.0, c.count ? c.sum_y / count : 0.0, c.cx, c.cy,
                      c.half, 4.0 * c.half * c.half, count, c.first_child, c.first_point});
  }
}

int QuadTree::child_for(const Cell& cell, double x, double y) const noexcept {
  return cell.first_child + (x >= cell.cx ? 1 : 0) + (y >= cell.cy ? 2 : 0);
}

void QuadTree::subdivide(int cell) {
  const int first = static_cast<int>(cells_.size());
  const double half = 0.5 * cells_[cell].half;
  for (int q = 0; q < 4; ++q) {
    Cell child;
    child.half = half;
    child.cx = cells_[cell].cx + ((q & 1) ? half : -half);
    child.cy = cells_[cell].cy + ((q & 2) ? half : -half);
    cells_.push_back(std::move(child));
  }
  cells_[cell].first_child = first;
}

void QuadTree::insert(int cell, std::size_t index, int depth) {
  const double x = points_(index, 0);
  const double y = points_(index, 1);
  for (;;) {
    Cell& c = cells_[cell];
    c.sum_x += x;
    c.sum_y += y;
    ++c.count;
    if (c.first_child < 0) {
      bool duplicate = c.first_point >= 0;
      for (int p = c.first_point; p >= 0; p = next_[p]) {
        if (points_(p, 0) != x || points_(p, 1) != y) duplicate = false;
      }
      if (c.first_point < 0 || duplicate || depth >= kMaxDepth) {
        next_[index] = c.first_point;
        c.first_point = static_cast<int>(index);
        return;
      }
      int moved = c.first_point;
      c.first_point = -1;
      subdivide(cell);
      while (moved >= 0) {
        const int following = next_[moved];
        const int target = child_for(cells_[cell], points_(moved, 0), points_(moved, 1));
        Cell& t = cells_[target];
        t.sum_x += points_(moved, 0);
        t.sum_y += points_(moved, 1);
        t.count += 1;
        next_[moved] = t.first_point;
        t.first_point = moved;
        moved = following;
      }
    }
    cell = child_for(cells_[cell], x, y);
    ++depth;
  }
}

void QuadTree::accumulate(std::size_t index, double theta, double& fx, double& fy,
                          double& z) const {
  const double x = points_(index, 0);
  const double y = points_(index, 1);
  // Depth is capped, so the pending set never exceeds 3 per level plus one.
  std::array<int, 4 * kMaxDepth + 8> stack;
  std::size_t top = 0;
  stack[top++] = 0;
  const double theta2 = theta * theta;
  while (top > 0) {
    const Node& c = nodes_[stack[--top]];
    if (c.first_child < 0) {
      for (int p = c.first_point; p >= 0; p = next_[p]) {
        if (static_cast<std::size_t>(p) == index) continue;
        const double dx = x - points_(p, 0);
        const double dy = y - points_(p, 1);
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        z += q;
        fx += q * q * dx;
        fy += q * q * dy;
      }
      continue;
    }
    const double dx = x - c.com_x;
    const double dy = y - c.com_y;
    const double dist2 = dx * dx + dy * dy;
    if (c.width2 < theta2 * dist2 &&
        !(std::abs(x - c.cx) <= c.half && std::abs(y - c.cy) <= c.half)) {
      const double q = 1.0 / (1.0 + dist2);
      z += c.count * q;
      fx += c.count * q * q * dx;
      fy += c.count * q * q * dy;
      continue;
    }
    for (int k = 3; k >= 0; --k) {
      if (nodes_[c.first_child + k].count > 0.0) stack[top++] = c.first_child + k;
    }
  }
}

}  // namespace fedcore::detail
