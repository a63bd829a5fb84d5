#include "constel/constellations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "constel/errors.hpp"

namespace constel {

void PointCloud::validate() const {
  std::unordered_set<FruitId> seen;
  for (const auto& p : points) {
    if (!seen.insert(p.id).second) {
      throw InvalidCloudError("duplicate fruit id " + std::to_string(p.id));
    }
    if (!p.position.allFinite()) {
      throw InvalidCloudError("fruit " + std::to_string(p.id) + " has a non-finite position");
    }
    if (p.frames_seen < 0) {
      throw InvalidCloudError("fruit " + std::to_string(p.id) + " has negative frames_seen");
    }
  }
}

const FruitPoint* PointCloud::find(FruitId id) const {
  for (const auto& p : points) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

void EnumerationParams::validate() const {
  if (k < 4) throw ConfigError("k must be >= 4");
  if (n < k - 1) throw ConfigError("n must be >= k - 1");
  if (min_frames < 0) throw ConfigError("min_frames must be >= 0");
  if (max_per_anchor < 0) throw ConfigError("max_per_anchor must be >= 0");
}

long long EnumerationParams::cap() const {
  if (max_per_anchor > 0) return max_per_anchor;
  // C(n, k-1)
  long long c = 1;
  for (int i = 1; i <= k - 1; ++i) c = c * (n - (k - 1) + i) / i;
  return c;
}

namespace {

std::vector<double> flatten(const std::vector<FruitPoint>& points) {
  std::vector<double> rows;
  rows.reserve(points.size() * 3);
  for (const auto& p : points) rows.insert(rows.end(), p.position.data(), p.position.data() + 3);
  return rows;
}

std::vector<FruitPoint> sorted_by_id(std::vector<FruitPoint> points) {
  std::sort(points.begin(), points.end(),
            [](const FruitPoint& a, const FruitPoint& b) { return a.id < b.id; });
  return points;
}

}  // namespace

CloudIndex::CloudIndex(std::vector<FruitPoint> points)
    : points_(sorted_by_id(std::move(points))), tree_(3, flatten(points_)) {}

std::optional<std::size_t> CloudIndex::position_of(FruitId id) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), id,
                             [](const FruitPoint& p, FruitId v) { return p.id < v; });
  if (it == points_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - points_.begin());
}

std::vector<FruitId> CloudIndex::knn(FruitId query_id, std::size_t n) const {
  const auto pos = position_of(query_id);
  if (!pos) throw InvalidCloudError("knn: unknown fruit id " + std::to_string(query_id));
  if (points_.size() < n + 1) {
    throw InsufficientPointsError("knn: cloud has " + std::to_string(points_.size()) +
                                  " points, need " + std::to_string(n + 1));
  }
  const Vec3& q = points_[*pos].position;
  const auto hits = tree_.nearest({q.data(), 3}, n, std::numeric_limits<double>::infinity(), *pos);
  std::vector<FruitId> ids;
  ids.reserve(hits.size());
  for (const auto& h : hits) ids.push_back(points_[h.index].id);
  return ids;
}

std::vector<std::pair<FruitId, double>> CloudIndex::within(const Vec3& p, double radius) const {
  const auto hits = tree_.nearest({p.data(), 3}, points_.size(), radius * radius);
  std::vector<std::pair<FruitId, double>> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.emplace_back(points_[h.index].id, std::sqrt(h.sq_dist));
  return out;
}

std::vector<FruitId> knn(const PointCloud& cloud, FruitId query_id, std::size_t n) {
  return CloudIndex(cloud.points).knn(query_id, n);
}

DegeneracyCheck is_degenerate(std::span<const Vec3> points) {
  if (points.size() < 3) return {true, "fewer than 3 points"};
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if ((points[i] - points[j]).norm() < 1e-9) return {true, "coincident points"};
    }
  }
  const auto [a, b] = select_ab(points);
  const double ab = (points[b] - points[a]).norm();
  double max_off = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == a || i == b) continue;
    max_off = std::max(max_off, point_line_distance(points[i], points[a], points[b]));
  }
  if (max_off < kCollinearityRatio * ab) return {true, "collinear with AB"};
  return {};
}

std::vector<DescribedConstellation> enumerate_described(const PointCloud& cloud,
                                                        const EnumerationParams& params) {
  params.validate();
  std::vector<FruitPoint> kept;
  for (const auto& p : cloud.points) {
    if (p.frames_seen >= params.min_frames) kept.push_back(p);
  }
  const auto k = static_cast<std::size_t>(params.k);
  std::vector<DescribedConstellation> out;
  if (kept.size() < k) return out;

  const CloudIndex index(std::move(kept));
  const auto& pts = index.points();
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(params.n), pts.size() - 1);
  const long long cap = params.cap();

  std::set<std::vector<FruitId>> seen;
  std::vector<std::size_t> combo(k - 1);
  std::vector<FruitId> ids(k);
  std::vector<Vec3> positions(k);

  for (const auto& anchor : pts) {
    const auto neighbours = index.knn(anchor.id, n);
    std::iota(combo.begin(), combo.end(), std::size_t{0});
    long long emitted = 0;
    while (emitted < cap) {
      ++emitted;
      ids[0] = anchor.id;
      for (std::size_t i = 0; i + 1 < k; ++i) ids[i + 1] = neighbours[combo[i]];
      std::vector<FruitId> key(ids);
      std::sort(key.begin(), key.end());
      if (seen.insert(std::move(key)).second) {
        for (std::size_t i = 0; i < k; ++i) positions[i] = pts[*index.position_of(ids[i])].position;
        if (!is_degenerate(positions).degenerate) {
          try {
            auto canon = canonicalize(positions);
            DescribedConstellation dc;
            dc.constellation.anchor_id = anchor.id;
            dc.constellation.member_ids.reserve(k);
            for (auto i : canon.order) dc.constellation.member_ids.push_back(ids[i]);
            dc.frame = canon.frame;
            // Relabel frame indices to canonical positions.
            const auto pos_in_order = [&](std::size_t input) {
              return static_cast<std::size_t>(
                  std::find(canon.order.begin(), canon.order.end(), input) - canon.order.begin());
            };
            dc.frame.label_a = 0;
            dc.frame.label_b = 1;
            dc.frame.label_c = pos_in_order(canon.frame.label_c);
            dc.descriptor = std::move(canon.descriptor);
            out.push_back(std::move(dc));
          } catch (const DegenerateError&) {
          }
        }
      }
      // Next (k-1)-combination of [0, n) in lexicographic order.
      std::size_t i = k - 1;
      while (i > 0 && combo[i - 1] == n - (k - 1) + (i - 1)) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < k - 1; ++j) combo[j] = combo[j - 1] + 1;
    }
  }
  return out;
}

std::vector<Constellation> enumerate_constellations(const PointCloud& cloud,
                                                    const EnumerationParams& params) {
  auto described = enumerate_described(cloud, params);
  std::vector<Constellation> out;
  out.reserve(described.size());
  for (auto& d : described) out.push_back(std::move(d.constellation));
  return out;
}

}  // namespace constel
