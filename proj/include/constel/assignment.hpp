#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace constel {

/// Dense cost matrix for the linear assignment problem; nullopt marks a
/// forbidden cell.
using AssignmentCosts = std::vector<std::vector<std::optional<std::int64_t>>>;

/// Minimum-cost partial assignment. Every row is either assigned to a distinct
/// allowed column or left unassigned (cost 0), so only negative-cost cells are
/// ever worth taking. Returns, per row, the assigned column or -1.
///
/// Hungarian method with potentials on the matrix padded with one zero-cost
/// "unassigned" column per row; O(r^2 (r + c)).
std::vector<int> solve_assignment(const AssignmentCosts& costs);

}  // namespace constel
