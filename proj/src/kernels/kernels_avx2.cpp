// Compiled with -mavx2 (no -mfma): multiply and add stay separate so every
// lane rounds exactly like the scalar loop.

#include "kernels_impl.hpp"

#if CONSTEL_HAVE_AVX2_KERNELS

#include <immintrin.h>

#include <cstdint>

namespace constel::kernels::detail {

void sq_distances_avx2(const double* query, const double* rows, std::size_t dim,
                       std::span<double> out) {
  const std::size_t n = out.size();
  const auto stride = static_cast<std::int64_t>(dim);
  const __m256i offsets = _mm256_set_epi64x(3 * stride, 2 * stride, stride, 0);
  std::size_t r = 0;
  for (; r + 4 <= n; r += 4) {
    const double* base = rows + r * dim;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d v = _mm256_i64gather_pd(base + d, offsets, 8);
      const __m256d diff = _mm256_sub_pd(v, _mm256_set1_pd(query[d]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out.data() + r, acc);
  }
  if (r < n) sq_distances_scalar(query, rows + r * dim, dim, out.subspan(r));
}

void transform_residuals_avx2(const double* rot, const double* trans, double scale,
                              const double* src, const double* dst, std::span<double> out) {
  const std::size_t n = out.size();
  const __m256i offsets = _mm256_set_epi64x(9, 6, 3, 0);
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* sp = src + 3 * i;
    const double* dp = dst + 3 * i;
    const __m256d x = _mm256_i64gather_pd(sp, offsets, 8);
    const __m256d y = _mm256_i64gather_pd(sp + 1, offsets, 8);
    const __m256d z = _mm256_i64gather_pd(sp + 2, offsets, 8);
    __m256d acc = _mm256_setzero_pd();
    for (int row = 0; row < 3; ++row) {
      const double* r = rot + 3 * row;
      __m256d m = _mm256_mul_pd(_mm256_set1_pd(r[0]), x);
      m = _mm256_add_pd(m, _mm256_mul_pd(_mm256_set1_pd(r[1]), y));
      m = _mm256_add_pd(m, _mm256_mul_pd(_mm256_set1_pd(r[2]), z));
      m = _mm256_add_pd(_mm256_mul_pd(s, m), _mm256_set1_pd(trans[row]));
      const __m256d diff = _mm256_sub_pd(m, _mm256_i64gather_pd(dp + row, offsets, 8));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out.data() + i, acc);
  }
  if (i < n) {
    transform_residuals_scalar(rot, trans, scale, src + 3 * i, dst + 3 * i, out.subspan(i));
  }
}

}  // namespace constel::kernels::detail

#endif
