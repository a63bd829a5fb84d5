#pragma once

#include <cstddef>
#include <span>

namespace constel::kernels::detail {

void sq_distances_scalar(const double* query, const double* rows, std::size_t dim,
                         std::span<double> out);
void transform_residuals_scalar(const double* rot, const double* trans, double scale,
                                const double* src, const double* dst, std::span<double> out);

#if defined(__x86_64__) || defined(_M_X64)
#define CONSTEL_HAVE_AVX2_KERNELS 1
void sq_distances_avx2(const double* query, const double* rows, std::size_t dim,
                       std::span<double> out);
void transform_residuals_avx2(const double* rot, const double* trans, double scale,
                              const double* src, const double* dst, std::span<double> out);
#else
#define CONSTEL_HAVE_AVX2_KERNELS 0
#endif

}  // namespace constel::kernels::detail
