#include "constel/assignment.hpp"

#include <cstdlib>
#include <limits>

#include "constel/errors.hpp"

namespace constel {

std::vector<int> solve_assignment(const AssignmentCosts& costs) {
  const std::size_t rows = costs.size();
  if (rows == 0) return {};
  const std::size_t cols = costs.front().size();
  for (const auto& r : costs) {
    if (r.size() != cols) throw DimensionMismatchError("solve_assignment: ragged cost matrix");
  }

  // Forbidden cells cost more than leaving every row unassigned could save.
  std::int64_t magnitude = 1;
  for (const auto& r : costs) {
    for (const auto& c : r) {
      if (c) magnitude += std::llabs(*c);
    }
  }
  const std::int64_t forbidden = magnitude;
  const std::size_t width = cols + rows;
  auto cost = [&](std::size_t i, std::size_t j) -> std::int64_t {
    if (j < cols) return costs[i][j] ? *costs[i][j] : forbidden;
    return 0;
  };

  // 1-based potentials formulation; column 0 is the virtual start.
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(rows + 1, 0);
  std::vector<std::int64_t> v(width + 1, 0);
  std::vector<std::size_t> match(width + 1, 0);  // column -> row
  std::vector<std::size_t> way(width + 1, 0);
  std::vector<std::int64_t> minv(width + 1);
  std::vector<char> used(width + 1);

  for (std::size_t i = 1; i <= rows; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= width; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= width; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> result(rows, -1);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (match[j] != 0 && costs[match[j] - 1][j - 1]) {
      result[match[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return result;
}

}  // namespace constel
