#pragma once

// Data-parallel arithmetic used by likelihood assembly and projections.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at startup from CPUID; the
// DAR_KERNELS environment variable ("scalar" or "avx2") or set_backend()
// override the choice. Results of the two variants agree to rounding but are
// not bit-identical (different summation order, fused multiply-add).

#include <cstddef>
#include <span>
#include <string_view>

namespace dar::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view to_string(Backend b) noexcept;

bool avx2_available() noexcept;
Backend active_backend() noexcept;
/// Throws dar::Error if the requested backend is not available on this CPU.
void set_backend(Backend b);

/// Sum_i a[i] * b[i].
double dot(std::span<const double> a, std::span<const double> b);
/// Sum_i a[i]^2.
double sum_squares(std::span<const double> a);
/// y += alpha * x.
void axpy(double alpha, std::span<const double> x, std::span<double> y);
/// y = alpha * A x + beta * y for column-major A (rows x cols).
void gemv(double alpha, const double* a, std::size_t rows, std::size_t cols,
          std::span<const double> x, double beta, std::span<double> y);
/// y = alpha * A^T x + beta * y for column-major A (rows x cols).
void gemv_t(double alpha, const double* a, std::size_t rows, std::size_t cols,
            std::span<const double> x, double beta, std::span<double> y);

/// Function table of one backend; exposed so tests can compare variants directly.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum_squares)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*gemv)(double, const double*, std::size_t, std::size_t, const double*, double, double*);
  void (*gemv_t)(double, const double*, std::size_t, std::size_t, const double*, double, double*);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the library was built without AVX2 support.
const KernelTable* avx2_table() noexcept;

}  // namespace dar::kernels
