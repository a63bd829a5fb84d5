#include "constel/starhash.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "constel/errors.hpp"

namespace constel {

namespace {

const Vec3 kDiagonal = Vec3::Ones().normalized();

bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

// Smallest rotation taking unit vector `from` onto the diagonal.
Mat3 align_to_diagonal(const Vec3& from) {
  const Vec3 axis = from.cross(kDiagonal);
  const double sin_a = axis.norm();
  const double cos_a = from.dot(kDiagonal);
  if (sin_a < 1e-12) {
    if (cos_a > 0.0) return Mat3::Identity();
    return axis_angle(Vec3(1.0, -1.0, 0.0).normalized(), std::numbers::pi);
  }
  return axis_angle(axis / sin_a, std::atan2(sin_a, cos_a));
}

// Half-turn about the diagonal: 2uu^T - I.
Mat3 half_turn() { return 2.0 * kDiagonal * kDiagonal.transpose() - Mat3::Identity(); }

}  // namespace

std::pair<std::size_t, std::size_t> select_ab(std::span<const Vec3> points) {
  if (points.size() < 2) throw DegenerateError("select_ab: need at least 2 points");

  double best = -1.0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = (points[i] - points[j]).squaredNorm();
      // Endpoints of the candidate, lexicographically ordered.
      std::size_t p = i;
      std::size_t q = j;
      if (lex_less(points[q], points[p])) std::swap(p, q);
      bool take = d > best;
      if (!take && d == best) {
        take = lex_less(points[p], points[lo]) ||
               (points[p] == points[lo] && lex_less(points[q], points[hi]));
      }
      if (take) {
        best = d;
        lo = p;
        hi = q;
      }
    }
  }
  if (best <= 0.0) throw DegenerateError("select_ab: all points coincide");

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  const double d_lo = (points[lo] - centroid).squaredNorm();
  const double d_hi = (points[hi] - centroid).squaredNorm();
  // `lo` is the lexicographically smaller endpoint and wins an exact tie.
  if (d_hi < d_lo) return {hi, lo};
  return {lo, hi};
}

double theta_max_projection(const Vec3& v) {
  const double num = std::sqrt(3.0) * (v.y() - v.x());
  const double den = 3.0 * v.z();
  if (std::abs(num) < 1e-300 && std::abs(den) < 1e-300) {
    throw DegenerateError("theta_max_projection: normal is parallel to the diagonal");
  }
  const double theta = std::atan2(num, den);
  return theta <= -std::numbers::pi ? std::numbers::pi : theta;
}

CanonicalFrame canonical_frame(std::span<const Vec3> points) {
  if (points.size() < 3) throw DegenerateError("canonical_frame: need at least 3 points");
  CanonicalFrame frame;
  const auto [a, b] = select_ab(points);
  frame.label_a = a;
  frame.label_b = b;

  const Vec3 origin = points[a];
  const Vec3 ab = points[b] - origin;
  const double ab_len = ab.norm();

  // Plane-defining star: farthest from line AB, ties to the lexicographically
  // smallest position.
  double best = -1.0;
  std::size_t c = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == a || i == b) continue;
    const double d = point_line_distance(points[i], points[a], points[b]);
    if (d > best || (d == best && lex_less(points[i], points[c]))) {
      best = d;
      c = i;
    }
  }
  if (best < kCollinearityRatio * ab_len) {
    throw DegenerateError("canonical_frame: constellation is collinear with AB");
  }
  frame.label_c = c;

  const double scale = std::sqrt(3.0) / ab_len;
  const Mat3 to_diagonal = align_to_diagonal(ab / ab_len);
  const Vec3 c_mid = scale * (to_diagonal * (points[c] - origin));
  frame.normal_v = kDiagonal.cross(c_mid).normalized();
  frame.theta = theta_max_projection(frame.normal_v);

  Mat3 rotation = axis_angle(kDiagonal, frame.theta) * to_diagonal;
  const Vec3 c_rot = scale * (rotation * (points[c] - origin));
  if (c_rot.x() > c_rot.y()) {
    rotation = half_turn() * rotation;
    frame.flipped = true;
  }

  frame.transform.rotation = rotation;
  frame.transform.scale = scale;
  frame.transform.translation = -scale * (rotation * origin);
  return frame;
}

CanonicalConstellation canonicalize(std::span<const Vec3> points) {
  CanonicalConstellation out;
  out.frame = canonical_frame(points);

  std::vector<Vec3> canon(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) canon[i] = apply(out.frame.transform, points[i]);

  std::vector<std::size_t> rest;
  rest.reserve(points.size() - 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i != out.frame.label_a && i != out.frame.label_b) rest.push_back(i);
  }
  std::sort(rest.begin(), rest.end(), [&](std::size_t l, std::size_t r) {
    if (canon[l] != canon[r]) return lex_less(canon[l], canon[r]);
    return l < r;
  });

  out.order.reserve(points.size());
  out.order.push_back(out.frame.label_a);
  out.order.push_back(out.frame.label_b);
  out.order.insert(out.order.end(), rest.begin(), rest.end());

  out.descriptor.k = static_cast<int>(points.size());
  out.descriptor.code.reserve(3 * rest.size());
  for (auto i : rest) {
    out.descriptor.code.insert(out.descriptor.code.end(), canon[i].data(), canon[i].data() + 3);
  }
  return out;
}

Descriptor describe(std::span<const Vec3> points) { return canonicalize(points).descriptor; }

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  if (a.k != b.k || a.code.size() != b.code.size()) {
    throw DimensionMismatchError("descriptor_distance: descriptors have different k");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.code.size(); ++i) {
    const double diff = a.code[i] - b.code[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

SimilarityTransform induced_transform(const CanonicalFrame& query_frame,
                                      const CanonicalFrame& map_frame) {
  return compose(invert(map_frame.transform), query_frame.transform);
}

}  // namespace constel
