#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "nbv/common.hpp"

namespace nbv {

// Exact 3D kd-tree (median split). Nearest-neighbor queries are used by the
// Chamfer acquisition/metrics, the KNN graph builder, and the segmenter; all
// results are exact, with index-order tie-breaking for determinism.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts) {
    idx_.resize(pts_.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    nodes_.reserve(pts_.size() * 2 + 1);
    if (!pts_.empty()) root_ = build(0, pts_.size(), 0);
  }

  std::size_t size() const { return pts_.size(); }

  struct Hit {
    int index = -1;
    double d2 = std::numeric_limits<double>::infinity();
  };

  Hit nearest(const Vec3& q) const {
    Hit best;
    if (root_ >= 0) search(root_, q, best);
    return best;
  }

  // k nearest neighbors sorted by (distance, index); exact.
  std::vector<Hit> knn(const Vec3& q, int k) const {
    std::vector<Hit> heap;  // max-heap on (d2, index)
    heap.reserve(k + 1);
    if (root_ >= 0 && k > 0) search_k(root_, q, k, heap);
    std::sort(heap.begin(), heap.end(), [](const Hit& a, const Hit& b) {
      return a.d2 != b.d2 ? a.d2 < b.d2 : a.index < b.index;
    });
    return heap;
  }

 private:
  struct Node {
    int axis = 0;
    int point = -1;  // index into pts_
    int left = -1, right = -1;
  };

  int build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) {
                       const double va = pts_[a][axis], vb = pts_[b][axis];
                       return va != vb ? va < vb : a < b;
                     });
    Node node;
    node.axis = axis;
    node.point = idx_[mid];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void consider(int pi, const Vec3& q, Hit& best) const {
    const double d2 = (pts_[pi] - q).squaredNorm();
    if (d2 < best.d2 || (d2 == best.d2 && pi < best.index)) {
      best.d2 = d2;
      best.index = pi;
    }
  }

  void search(int ni, const Vec3& q, Hit& best) const {
    const Node& node = nodes_[ni];
    consider(node.point, q, best);
    const double delta = q[node.axis] - pts_[node.point][node.axis];
    const int first = delta < 0 ? node.left : node.right;
    const int second = delta < 0 ? node.right : node.left;
    if (first >= 0) search(first, q, best);
    if (second >= 0 && delta * delta < best.d2) search(second, q, best);
  }

  static bool heap_less(const Hit& a, const Hit& b) {
    return a.d2 != b.d2 ? a.d2 < b.d2 : a.index > b.index;
  }

  void search_k(int ni, const Vec3& q, int k, std::vector<Hit>& heap) const {
    const Node& node = nodes_[ni];
    const double d2 = (pts_[node.point] - q).squaredNorm();
    Hit h{node.point, d2};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(h);
      std::push_heap(heap.begin(), heap.end(), heap_less);
    } else if (heap_less(h, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), heap_less);
      heap.back() = h;
      std::push_heap(heap.begin(), heap.end(), heap_less);
    }
    const double delta = q[node.axis] - pts_[node.point][node.axis];
    const int first = delta < 0 ? node.left : node.right;
    const int second = delta < 0 ? node.right : node.left;
    if (first >= 0) search_k(first, q, k, heap);
    const bool full = static_cast<int>(heap.size()) >= k;
    if (second >= 0 && (!full || delta * delta <= heap.front().d2))
      search_k(second, q, k, heap);
  }

  std::vector<Vec3> pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace nbv
