#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "constel/geom.hpp"
#include "constel/kdtree.hpp"
#include "constel/starhash.hpp"

namespace constel {

using FruitId = std::uint64_t;

struct FruitPoint {
  FruitId id = 0;
  Vec3 position = Vec3::Zero();
  int frames_seen = 0;
};

/// A semantic point cloud: one point per fruit centroid.
struct PointCloud {
  std::string source_id;
  std::vector<FruitPoint> points;
  bool metric = true;

  /// Throws InvalidCloudError on duplicate ids, negative frame counts or
  /// non-finite coordinates.
  void validate() const;
  const FruitPoint* find(FruitId id) const;
};

/// k fruits in canonical order (A, B, then ascending canonical x).
struct Constellation {
  std::vector<FruitId> member_ids;
  FruitId anchor_id = 0;
};

struct EnumerationParams {
  int k = 5;
  int n = 10;
  int min_frames = 5;
  int max_per_anchor = 0;  // 0: every (k-1)-subset, i.e. C(n, k-1)

  void validate() const;
  /// Per-anchor subset cap with the 0 default resolved.
  long long cap() const;
};

/// Exact nearest-neighbour index over a cloud. Ties resolve to the lower id.
class CloudIndex {
 public:
  explicit CloudIndex(std::vector<FruitPoint> points);

  /// `n` nearest fruits to `query_id`, excluding it, nearest first.
  /// Throws InsufficientPointsError when fewer than n other fruits exist.
  std::vector<FruitId> knn(FruitId query_id, std::size_t n) const;

  /// Positions within `radius` of `p`, nearest first, as (id, distance).
  std::vector<std::pair<FruitId, double>> within(const Vec3& p, double radius) const;

  const std::vector<FruitPoint>& points() const { return points_; }
  std::optional<std::size_t> position_of(FruitId id) const;

 private:
  std::vector<FruitPoint> points_;  // sorted by id
  KdTree tree_;
};

std::vector<FruitId> knn(const PointCloud& cloud, FruitId query_id, std::size_t n);

struct DegeneracyCheck {
  bool degenerate = false;
  std::string reason;
};

/// Coincident points (within 1e-9) or every point within
/// kCollinearityRatio * |AB| of line AB.
DegeneracyCheck is_degenerate(std::span<const Vec3> points);

/// A constellation together with its canonical frame and descriptor.
struct DescribedConstellation {
  Constellation constellation;
  CanonicalFrame frame;  // labels index into constellation.member_ids
  Descriptor descriptor;
};

/// Every anchor passing the min_frames filter contributes {anchor} plus each
/// (k-1)-subset of its n nearest (filtered) neighbours, in lexicographic
/// subset order, up to the per-anchor cap. Duplicated member sets are kept
/// once, under the first anchor (ascending id) that produced them.
std::vector<DescribedConstellation> enumerate_described(const PointCloud& cloud,
                                                        const EnumerationParams& params);

std::vector<Constellation> enumerate_constellations(const PointCloud& cloud,
                                                    const EnumerationParams& params);

}  // namespace constel
