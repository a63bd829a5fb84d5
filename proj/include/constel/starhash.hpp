#pragma once

// Scale/translation/rotation-invariant descriptor for small 3D constellations.
//
// The two most separated points A and B are mapped to the origin and to
// (1,1,1). The remaining freedom, a rotation about the diagonal, is fixed by
// the star C farthest from line AB: the normal of plane ABC is turned to
// point as far up +Z as possible, and a half-turn is added if C lands on the
// C_x > C_y side. The descriptor is the canonical xyz of every point except A
// and B, sorted by canonical x.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "constel/geom.hpp"

namespace constel {

/// Points whose max distance from line AB is below this fraction of |AB| are
/// rejected as collinear.
inline constexpr double kCollinearityRatio = 0.02;

struct CanonicalFrame {
  SimilarityTransform transform;  // world -> canonical
  std::size_t label_a = 0;
  std::size_t label_b = 0;
  std::size_t label_c = 0;  // plane-defining star
  double theta = 0.0;
  Vec3 normal_v = Vec3::Zero();  // unit normal of ABC before the theta turn
  bool flipped = false;          // half-turn applied for C_x > C_y
};

struct Descriptor {
  std::vector<double> code;  // 3(k-2) values
  int k = 0;
};

/// Frame, descriptor and the canonical ordering (A, B, rest by ascending x)
/// of the input indices.
struct CanonicalConstellation {
  CanonicalFrame frame;
  Descriptor descriptor;
  std::vector<std::size_t> order;
};

/// Indices of the most separated pair, A being the one nearer the centroid.
/// Throws DegenerateError when all points coincide or fewer than 2 are given.
std::pair<std::size_t, std::size_t> select_ab(std::span<const Vec3> points);

/// Angle about the unit diagonal that maximizes the z component of the
/// rotated normal `v` (unit, orthogonal to the diagonal). Result in (-pi, pi].
double theta_max_projection(const Vec3& v);

CanonicalFrame canonical_frame(std::span<const Vec3> points);

CanonicalConstellation canonicalize(std::span<const Vec3> points);

Descriptor describe(std::span<const Vec3> points);

/// Euclidean distance between codes. Throws DimensionMismatchError.
double descriptor_distance(const Descriptor& a, const Descriptor& b);

/// Transform taking query-world coordinates into map-world coordinates.
SimilarityTransform induced_transform(const CanonicalFrame& query_frame,
                                      const CanonicalFrame& map_frame);

}  // namespace constel
