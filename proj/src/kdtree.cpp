#include "constel/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "constel/errors.hpp"
#include "constel/kernels.hpp"

namespace constel {

namespace {

bool hit_less(const KdTree::Hit& a, const KdTree::Hit& b) {
  if (a.sq_dist != b.sq_dist) return a.sq_dist < b.sq_dist;
  return a.index < b.index;
}

}  // namespace

KdTree::KdTree(std::size_t dim, std::vector<double> rows, std::size_t leaf_size) : dim_(dim) {
  if (dim == 0) throw DimensionMismatchError("KdTree: dimension must be positive");
  if (rows.size() % dim != 0) throw DimensionMismatchError("KdTree: ragged row data");
  leaf_size = std::max<std::size_t>(leaf_size, 1);
  data_ = std::move(rows);
  order_.resize(data_.size() / dim_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!order_.empty()) build(0, order_.size(), leaf_size);

  std::vector<double> permuted(data_.size());
  for (std::size_t pos = 0; pos < order_.size(); ++pos) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(order_[pos] * dim_), dim_,
                permuted.begin() + static_cast<std::ptrdiff_t>(pos * dim_));
  }
  data_ = std::move(permuted);
}

std::size_t KdTree::build(std::size_t begin, std::size_t end, std::size_t leaf_size) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end});
  box_lo_.resize(box_lo_.size() + dim_, std::numeric_limits<double>::infinity());
  box_hi_.resize(box_hi_.size() + dim_, -std::numeric_limits<double>::infinity());
  double* lo = box_lo_.data() + id * dim_;
  double* hi = box_hi_.data() + id * dim_;
  for (std::size_t pos = begin; pos < end; ++pos) {
    const double* row = data_.data() + order_[pos] * dim_;
    for (std::size_t d = 0; d < dim_; ++d) {
      lo[d] = std::min(lo[d], row[d]);
      hi[d] = std::max(hi[d], row[d]);
    }
  }
  if (end - begin <= leaf_size) return id;

  std::size_t split_dim = 0;
  double spread = -1.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    if (hi[d] - lo[d] > spread) {
      spread = hi[d] - lo[d];
      split_dim = d;
    }
  }
  if (spread <= 0.0) return id;  // all rows identical

  const std::size_t mid = begin + (end - begin) / 2;
  auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
  std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double va = data_[a * dim_ + split_dim];
                     const double vb = data_[b * dim_ + split_dim];
                     return va != vb ? va < vb : a < b;
                   });
  const std::size_t left = build(begin, mid, leaf_size);
  const std::size_t right = build(mid, end, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double KdTree::box_sq_dist(std::size_t node, std::span<const double> query) const {
  const double* lo = box_lo_.data() + node * dim_;
  const double* hi = box_hi_.data() + node * dim_;
  double acc = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    double gap = 0.0;
    if (query[d] < lo[d]) {
      gap = lo[d] - query[d];
    } else if (query[d] > hi[d]) {
      gap = query[d] - hi[d];
    }
    acc += gap * gap;
  }
  return acc;
}

std::vector<KdTree::Hit> KdTree::nearest(std::span<const double> query, std::size_t count,
                                         double max_sq_dist, std::size_t exclude) const {
  if (query.size() != dim_) throw DimensionMismatchError("KdTree: query dimension mismatch");
  std::vector<Hit> heap;  // max-heap under hit_less
  if (count == 0 || nodes_.empty()) return heap;
  heap.reserve(count + 1);
  std::vector<double> dist;

  auto bound = [&] {
    return heap.size() == count ? std::min(max_sq_dist, heap.front().sq_dist) : max_sq_dist;
  };

  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    if (box_sq_dist(id, query) > bound()) continue;
    const Node& node = nodes_[id];
    if (node.left == kNone) {
      dist.resize(node.end - node.begin);
      kernels::sq_distances(query.data(), data_.data() + node.begin * dim_, dim_, dist);
      for (std::size_t i = 0; i < dist.size(); ++i) {
        const Hit hit{order_[node.begin + i], dist[i]};
        if (hit.index == exclude || hit.sq_dist > max_sq_dist) continue;
        if (heap.size() < count) {
          heap.push_back(hit);
          std::push_heap(heap.begin(), heap.end(), hit_less);
        } else if (hit_less(hit, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), hit_less);
          heap.back() = hit;
          std::push_heap(heap.begin(), heap.end(), hit_less);
        }
      }
      continue;
    }
    // Visit the nearer child first.
    const double dl = box_sq_dist(node.left, query);
    const double dr = box_sq_dist(node.right, query);
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), hit_less);
  return heap;
}

}  // namespace constel
