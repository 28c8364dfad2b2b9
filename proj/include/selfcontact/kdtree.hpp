#pragma once

// Static kd-tree over a point set with exact nearest-neighbour queries.
// Ties in distance resolve to the lowest id, the same rule a linear scan in
// id order uses, so both paths return identical results.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace selfcontact {

template <int Dim, typename Id = std::int32_t>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  struct Hit {
    Id id = -1;
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  KdTree(std::vector<Point> points, std::vector<Id> ids)
      : points_(std::move(points)), ids_(std::move(ids)) {
    perm_.resize(points_.size());
    std::iota(perm_.begin(), perm_.end(), 0);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    if (!points_.empty()) build(0, perm_.size());
  }

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  Hit nearest(const Point& q) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1: leaf
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto idx = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end, -1, 0.0, -1, -1});
    if (end - begin <= kLeafSize) return idx;

    Point lo = points_[perm_[begin]];
    Point hi = lo;
    for (std::size_t k = begin; k < end; ++k) {
      lo = lo.cwiseMin(points_[perm_[k]]);
      hi = hi.cwiseMax(points_[perm_[k]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return idx;  // all coincident: stay a leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                     perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                     perm_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[perm_[mid]][axis];
    const auto l = build(begin, mid);
    const auto r = build(mid, end);
    nodes_[idx].axis = axis;
    nodes_[idx].split = split;
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  static bool better(double d, Id id, const Hit& best) {
    return d < best.squared_distance || (d == best.squared_distance && id < best.id);
  }

  void search(std::int32_t ni, const Point& q, Hit& best) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (std::size_t k = n.begin; k < n.end; ++k) {
        const auto p = perm_[k];
        const double d = (points_[p] - q).squaredNorm();
        if (better(d, ids_[p], best)) best = {ids_[p], d};
      }
      return;
    }
    const double delta = q[n.axis] - n.split;
    const auto first = delta < 0.0 ? n.left : n.right;
    const auto second = delta < 0.0 ? n.right : n.left;
    search(first, q, best);
    // Points on the far side are at least |delta| away along the split axis;
    // equal distances must still be visited for the id tie-break.
    if (delta * delta <= best.squared_distance) search(second, q, best);
  }

  std::vector<Point> points_;
  std::vector<Id> ids_;
  std::vector<std::size_t> perm_;
  std::vector<Node> nodes_;
};

}  // namespace selfcontact
