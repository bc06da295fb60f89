#include "dar/kernels.hpp"

namespace dar::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_scalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(double alpha, const double* a, std::size_t rows, std::size_t cols, const double* x,
                 double beta, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = beta == 0.0 ? 0.0 : beta * y[i];
  for (std::size_t j = 0; j < cols; ++j) {
    const double s = alpha * x[j];
    const double* c = a + j * rows;
    for (std::size_t i = 0; i < rows; ++i) y[i] += s * c[i];
  }
}

void gemv_t_scalar(double alpha, const double* a, std::size_t rows, std::size_t cols,
                   const double* x, double beta, double* y) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = dot_scalar(a + j * rows, x, rows);
    y[j] = (beta == 0.0 ? 0.0 : beta * y[j]) + alpha * d;
  }
}

constexpr KernelTable kScalar{dot_scalar, sum_squares_scalar, axpy_scalar, gemv_scalar,
                              gemv_t_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace dar::kernels
