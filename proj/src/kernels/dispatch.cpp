#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar::kernels {

#ifdef DAR_HAVE_AVX2
const KernelTable* avx2_table_impl() noexcept;
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(DAR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("DAR_KERNELS");
  if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table(); t != nullptr) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view to_string(Backend b) noexcept { return b == Backend::Avx2 ? "avx2" : "scalar"; }

bool avx2_available() noexcept {
  static const bool ok = cpu_has_avx2();
  return ok;
}

const KernelTable* avx2_table() noexcept {
#ifdef DAR_HAVE_AVX2
  return avx2_available() ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

Backend active_backend() noexcept {
  return current().load() == &scalar_table() ? Backend::Scalar : Backend::Avx2;
}

void set_backend(Backend b) {
  if (b == Backend::Scalar) {
    current().store(&scalar_table());
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) fail(ErrorCode::InvalidArgument, "AVX2 kernels are not available on this CPU");
  current().store(t);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return current().load()->dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> a) {
  return current().load()->sum_squares(a.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  current().load()->axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(double alpha, const double* a, std::size_t rows, std::size_t cols,
          std::span<const double> x, double beta, std::span<double> y) {
  assert(x.size() == cols && y.size() == rows);
  current().load()->gemv(alpha, a, rows, cols, x.data(), beta, y.data());
}

void gemv_t(double alpha, const double* a, std::size_t rows, std::size_t cols,
            std::span<const double> x, double beta, std::span<double> y) {
  assert(x.size() == rows && y.size() == cols);
  current().load()->gemv_t(alpha, a, rows, cols, x.data(), beta, y.data());
}

}  // namespace dar::kernels
