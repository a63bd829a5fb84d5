#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
//
// Both variants accumulate in the same order and avoid fused multiply-add,
// so their results are bit-identical. The active variant is chosen once at
// first use from the CPU features, or forced with CONSTEL_SIMD=scalar.

#include <cstddef>
#include <span>
#include <string_view>

namespace constel::kernels {

enum class Isa { kScalar, kAvx2 };

/// Squared Euclidean distance from `query` (dim values) to each of the
/// `out.size()` row-major rows stored in `rows`.
using SqDistFn = void (*)(const double* query, const double* rows, std::size_t dim,
                          std::span<double> out);

/// Squared residual |s * R * src_i + t - dst_i|^2 for packed xyz triples.
/// `rotation` is row-major 3x3.
using ResidualFn = void (*)(const double* rotation, const double* translation, double scale,
                            const double* src, const double* dst, std::span<double> out);

struct KernelTable {
  Isa isa;
  SqDistFn sq_distances;
  ResidualFn transform_residuals;
};

const KernelTable& scalar_table();

/// Null when the binary or CPU lacks AVX2.
const KernelTable* avx2_table();

/// The table selected for this process.
const KernelTable& active();

std::string_view isa_name(Isa isa);

inline void sq_distances(const double* query, const double* rows, std::size_t dim,
                         std::span<double> out) {
  active().sq_distances(query, rows, dim, out);
}

inline void transform_residuals(const double* rotation, const double* translation, double scale,
                                const double* src, const double* dst, std::span<double> out) {
  active().transform_residuals(rotation, translation, scale, src, dst, out);
}

}  // namespace constel::kernels
