#pragma once

// Similarity transforms, least-squares alignment and robust estimation.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace constel {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// x -> scale * rotation * x + translation.
///
/// The rotation is proper (det = +1) and scale is strictly positive. A rigid
/// transform is the special case scale == 1.
struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  static SimilarityTransform identity() { return {}; }
};

Vec3 apply(const SimilarityTransform& t, const Vec3& p);

/// apply(compose(a, b), p) == apply(a, apply(b, p))
SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b);

SimilarityTransform invert(const SimilarityTransform& t);

/// Rotation by `angle` radians about the unit axis `axis` (Rodrigues).
Mat3 axis_angle(const Vec3& axis, double angle);

/// Rotation angle of R_a * R_b^T in radians, in [0, pi].
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Largest absolute entry difference of rotation, translation and scale.
double max_parameter_difference(const SimilarityTransform& a, const SimilarityTransform& b);

/// Perpendicular distance from p to the infinite line through a and b.
/// Throws DegenerateError when |a - b| < 1e-12.
double point_line_distance(const Vec3& p, const Vec3& a, const Vec3& b);

/// Closed-form least-squares similarity (or rigid, when with_scale is false)
/// transform mapping src onto dst. Reflections are excluded.
/// Throws DegenerateError for collinear or coincident src and
/// DimensionMismatchError for size mismatches or fewer than 3 pairs.
SimilarityTransform procrustes(std::span<const Vec3> src, std::span<const Vec3> dst,
                               bool with_scale);

struct RansacParams {
  double inlier_threshold = 0.05;
  int max_iterations = 2000;
  double confidence = 0.999;
  int min_inliers = 4;
  bool with_scale = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError if any field is out of range.
  void validate() const;
};

struct RansacResult {
  SimilarityTransform transform;
  std::vector<std::size_t> inliers;  // ascending indices into the input
  int iterations = 0;
};

/// Robust transform estimation over src[i] -> dst[i] correspondences.
///
/// Minimal samples of 3 pairs are drawn from a generator seeded with
/// params.seed; collinear samples are redrawn. The best consensus set is
/// refit with procrustes until the inlier set stops changing.
/// Throws NoConsensusError when the best set is smaller than min_inliers.
RansacResult ransac_transform(std::span<const Vec3> src, std::span<const Vec3> dst,
                              const RansacParams& params);

}  // namespace constel
