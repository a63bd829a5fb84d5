#include "constel/geom.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "constel/errors.hpp"
#include "constel/kernels.hpp"

namespace constel {

static_assert(sizeof(Vec3) == 3 * sizeof(double), "Vec3 must be tightly packed");

Vec3 apply(const SimilarityTransform& t, const Vec3& p) {
  return t.scale * (t.rotation * p) + t.translation;
}

SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b) {
  SimilarityTransform out;
  out.rotation = a.rotation * b.rotation;
  out.scale = a.scale * b.scale;
  out.translation = a.scale * (a.rotation * b.translation) + a.translation;
  return out;
}

SimilarityTransform invert(const SimilarityTransform& t) {
  SimilarityTransform out;
  out.rotation = t.rotation.transpose();
  out.scale = 1.0 / t.scale;
  out.translation = -out.scale * (out.rotation * t.translation);
  return out;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 cross;
  cross << 0.0, -axis.z(), axis.y(), axis.z(), 0.0, -axis.x(), -axis.y(), axis.x(), 0.0;
  return c * Mat3::Identity() + s * cross + (1.0 - c) * (axis * axis.transpose());
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double cos_angle = std::clamp(((a * b.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(cos_angle);
}

double max_parameter_difference(const SimilarityTransform& a, const SimilarityTransform& b) {
  const double dr = (a.rotation - b.rotation).cwiseAbs().maxCoeff();
  const double dt = (a.translation - b.translation).cwiseAbs().maxCoeff();
  return std::max({dr, dt, std::abs(a.scale - b.scale)});
}

double point_line_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 dir = b - a;
  const double len = dir.norm();
  if (len < 1e-12) throw DegenerateError("point_line_distance: line endpoints coincide");
  return (p - a).cross(dir).norm() / len;
}

namespace {

// Rejects coincident or collinear point sets. Uses the line through the point
// farthest from the centroid and the point farthest from that one.
void check_not_collinear(std::span<const Vec3> pts, double rel_tol) {
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  auto farthest_from = [&](const Vec3& q) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = (pts[i] - q).squaredNorm();
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  const std::size_t i0 = farthest_from(centroid);
  const std::size_t i1 = farthest_from(pts[i0]);
  const Vec3 dir = pts[i1] - pts[i0];
  const double len = dir.norm();
  if (len < 1e-12) throw DegenerateError("points coincide");
  double max_off = 0.0;
  for (const auto& p : pts) max_off = std::max(max_off, (p - pts[i0]).cross(dir).norm() / len);
  if (max_off < rel_tol * len) throw DegenerateError("points are collinear");
}

}  // namespace

SimilarityTransform procrustes(std::span<const Vec3> src, std::span<const Vec3> dst,
                               bool with_scale) {
  if (src.size() != dst.size()) {
    throw DimensionMismatchError("procrustes: src and dst sizes differ");
  }
  if (src.size() < 3) throw DimensionMismatchError("procrustes: need at least 3 pairs");
  check_not_collinear(src, 1e-9);

  const auto n = static_cast<double>(src.size());
  Vec3 mu_src = Vec3::Zero();
  Vec3 mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= n;
  mu_dst /= n;

  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 s = src[i] - mu_src;
    cov += (dst[i] - mu_dst) * s.transpose();
    var_src += s.squaredNorm();
  }
  cov /= n;
  var_src /= n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 signs = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs.z() = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  t.scale = with_scale ? svd.singularValues().dot(signs) / var_src : 1.0;
  if (!(t.scale > 0.0)) throw DegenerateError("procrustes: non-positive scale");
  t.translation = mu_dst - t.scale * (t.rotation * mu_src);
  return t;
}

void RansacParams::validate() const {
  if (!(inlier_threshold > 0.0)) throw ConfigError("ransac: inlier_threshold must be > 0");
  if (max_iterations < 1) throw ConfigError("ransac: max_iterations must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("ransac: confidence must be in (0, 1)");
  }
  if (min_inliers < 1) throw ConfigError("ransac: min_inliers must be >= 1");
}

namespace {

bool sample_is_degenerate(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double diameter = std::max({(a - b).norm(), (a - c).norm(), (b - c).norm()});
  if (diameter < 1e-12) return true;
  const double tol = 1e-6 * diameter;
  const std::array<std::array<const Vec3*, 3>, 3> tri{{{&a, &b, &c}, {&b, &a, &c}, {&c, &a, &b}}};
  for (const auto& [p, l0, l1] : tri) {
    if ((*l0 - *l1).norm() < 1e-12) return true;
    if (point_line_distance(*p, *l0, *l1) < tol) return true;
  }
  return false;
}

std::vector<std::size_t> collect_inliers(const SimilarityTransform& t, std::span<const Vec3> src,
                                         std::span<const Vec3> dst, double threshold,
                                         std::vector<double>& scratch) {
  std::array<double, 9> rot{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot[3 * r + c] = t.rotation(r, c);
  }
  scratch.resize(src.size());
  kernels::transform_residuals(rot.data(), t.translation.data(), t.scale, src.data()->data(),
                               dst.data()->data(), scratch);
  const double thr2 = threshold * threshold;
  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    if (scratch[i] <= thr2) inliers.push_back(i);
  }
  return inliers;
}

template <typename Index>
std::pair<std::vector<Vec3>, std::vector<Vec3>> gather(std::span<const Vec3> src,
                                                       std::span<const Vec3> dst,
                                                       const std::vector<Index>& idx) {
  std::vector<Vec3> s;
  std::vector<Vec3> d;
  s.reserve(idx.size());
  d.reserve(idx.size());
  for (auto i : idx) {
    s.push_back(src[i]);
    d.push_back(dst[i]);
  }
  return {std::move(s), std::move(d)};
}

}  // namespace

RansacResult ransac_transform(std::span<const Vec3> src, std::span<const Vec3> dst,
                              const RansacParams& params) {
  params.validate();
  if (src.size() != dst.size()) {
    throw DimensionMismatchError("ransac: src and dst sizes differ");
  }
  const std::size_t n = src.size();
  if (n < 3) throw NoConsensusError("ransac: need at least 3 correspondences");

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> scratch;

  RansacResult best;
  bool have_model = false;
  long needed = params.max_iterations;
  int iter = 0;
  for (; iter < needed; ++iter) {
    std::array<std::size_t, 3> s{};
    s[0] = pick(rng);
    do {
      s[1] = pick(rng);
    } while (s[1] == s[0]);
    do {
      s[2] = pick(rng);
    } while (s[2] == s[0] || s[2] == s[1]);
    if (sample_is_degenerate(src[s[0]], src[s[1]], src[s[2]]) ||
        sample_is_degenerate(dst[s[0]], dst[s[1]], dst[s[2]])) {
      continue;
    }
    const std::array<Vec3, 3> ss{src[s[0]], src[s[1]], src[s[2]]};
    const std::array<Vec3, 3> ds{dst[s[0]], dst[s[1]], dst[s[2]]};
    SimilarityTransform model;
    try {
      model = procrustes(ss, ds, params.with_scale);
    } catch (const DegenerateError&) {
      continue;
    }
    auto inliers = collect_inliers(model, src, dst, params.inlier_threshold, scratch);
    if (!have_model || inliers.size() > best.inliers.size()) {
      have_model = true;
      best.transform = model;
      best.inliers = std::move(inliers);
      const double w = static_cast<double>(best.inliers.size()) / static_cast<double>(n);
      const double miss = 1.0 - w * w * w;
      if (miss <= 0.0) {
        needed = iter + 1;
      } else {
        const double k = std::log(1.0 - params.confidence) / std::log(miss);
        if (std::isfinite(k)) {
          needed = std::min<long>(params.max_iterations, static_cast<long>(std::ceil(k)));
        }
      }
    }
  }
  best.iterations = iter;
  if (!have_model) throw NoConsensusError("ransac: every minimal sample was degenerate");
  if (best.inliers.size() < static_cast<std::size_t>(params.min_inliers)) {
    throw NoConsensusError("ransac: best consensus set has " +
                           std::to_string(best.inliers.size()) + " inliers, need " +
                           std::to_string(params.min_inliers));
  }

  // Refit on the consensus set until it is stable.
  for (int round = 0; round < 10 && best.inliers.size() >= 3; ++round) {
    auto [s, d] = gather(src, dst, best.inliers);
    SimilarityTransform refit;
    try {
      refit = procrustes(s, d, params.with_scale);
    } catch (const DegenerateError&) {
      break;
    }
    auto inliers = collect_inliers(refit, src, dst, params.inlier_threshold, scratch);
    if (inliers.size() < best.inliers.size()) break;
    const bool stable = inliers == best.inliers;
    best.transform = refit;
    best.inliers = std::move(inliers);
    if (stable) break;
  }
  if (best.inliers.size() < static_cast<std::size_t>(params.min_inliers)) {
    throw NoConsensusError("ransac: consensus collapsed during refit");
  }
  return best;
}

}  // namespace constel
