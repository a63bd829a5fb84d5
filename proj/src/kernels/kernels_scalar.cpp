#include "kernels_impl.hpp"

namespace constel::kernels::detail {

void sq_distances_scalar(const double* query, const double* rows, std::size_t dim,
                         std::span<double> out) {
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = rows + r * dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = row[d] - query[d];
      acc += diff * diff;
    }
    out[r] = acc;
  }
}

void transform_residuals_scalar(const double* rot, const double* trans, double scale,
                                const double* src, const double* dst, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = src[3 * i];
    const double y = src[3 * i + 1];
    const double z = src[3 * i + 2];
    double acc = 0.0;
    for (int row = 0; row < 3; ++row) {
      const double* r = rot + 3 * row;
      const double mapped = scale * (r[0] * x + r[1] * y + r[2] * z) + trans[row];
      const double diff = mapped - dst[3 * i + row];
      acc += diff * diff;
    }
    out[i] = acc;
  }
}

}  // namespace constel::kernels::detail
