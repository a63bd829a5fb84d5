#pragma once

// Brute-force reference implementations used as test oracles. None of these
// call into the library routine they are checking.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "constel/geom.hpp"

namespace oracle {

using constel::Mat3;
using constel::Vec3;

/// argmax over phi of v_z cos(phi) + (v_y - v_x)/sqrt(3) sin(phi) on a grid
/// of the given step over (-pi, pi].
double theta_grid(const Vec3& v, double step = 1e-4);

/// Minimum of |p - (a + t (b - a))| over a dense t grid, refined locally.
double point_line_grid(const Vec3& p, const Vec3& a, const Vec3& b);

/// Exhaustive (A, B) selection: max distance, A nearer the centroid, ties by
/// lexicographic order of the sorted endpoint coordinates.
std::pair<std::size_t, std::size_t> select_ab(const std::vector<Vec3>& pts);

struct Canonical {
  std::vector<Vec3> canonical;  // every input point in the canonical frame
  std::vector<double> code;     // non-A/B points sorted by canonical x
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;
};

/// Canonical frame found by searching rotations about the diagonal on a
/// 1e-4 rad grid (then refined by golden-section search) for the largest z
/// of the ABC normal, followed by the C_x <= C_y half-turn rule.
Canonical canonicalize_grid(const std::vector<Vec3>& pts);

/// Minimum total cost over every partial one-to-one assignment; nullopt cells
/// are forbidden and unassigned rows cost 0.
std::int64_t best_assignment_cost(const std::vector<std::vector<std::optional<std::int64_t>>>& costs);

/// Exhaustive maximum clique over a dense adjacency matrix (n <= ~20). Ties
/// by smallest total edge weight, then lexicographically smallest set.
std::vector<std::size_t> max_clique_exhaustive(const std::vector<std::vector<bool>>& adj,
                                               const std::vector<std::vector<double>>& weight);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

long long binomial(int n, int k);

Mat3 random_rotation(std::mt19937_64& rng);
constel::SimilarityTransform random_similarity(std::mt19937_64& rng, double min_scale,
                                               double max_scale, double max_shift);

/// Random points in a unit-ish box whose farthest point from the extreme
/// pair is well away from collinear.
std::vector<Vec3> random_constellation(std::mt19937_64& rng, int k);

}  // namespace oracle
