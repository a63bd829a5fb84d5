#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace constel {

/// Exact k-d tree over fixed-dimension points stored row-major.
///
/// Leaves are scanned with kernels::sq_distances. Results are ordered by
/// (squared distance, point index), so equal distances resolve to the lowest
/// index and queries agree with an exhaustive scan.
class KdTree {
 public:
  struct Hit {
    std::size_t index;
    double sq_dist;
  };

  KdTree() = default;
  KdTree(std::size_t dim, std::vector<double> rows, std::size_t leaf_size = 16);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }

  /// Up to `count` points with squared distance <= max_sq_dist, nearest first.
  /// `exclude` (if a valid index) is skipped.
  std::vector<Hit> nearest(std::span<const double> query, std::size_t count,
                           double max_sq_dist = std::numeric_limits<double>::infinity(),
                           std::size_t exclude = kNone) const;

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

 private:
  struct Node {
    std::size_t begin;
    std::size_t end;
    std::size_t left = kNone;
    std::size_t right = kNone;
  };

  std::size_t build(std::size_t begin, std::size_t end, std::size_t leaf_size);
  double box_sq_dist(std::size_t node, std::span<const double> query) const;

  std::size_t dim_ = 0;
  std::vector<double> data_;         // rows permuted into tree order
  std::vector<std::size_t> order_;   // tree position -> original index
  std::vector<Node> nodes_;
  std::vector<double> box_lo_;
  std::vector<double> box_hi_;
};

}  // namespace constel
