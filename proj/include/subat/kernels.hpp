#pragma once

// Inner-loop arithmetic used by the network engine and the subspace
// projection. Each kernel has a scalar reference implementation and, on
// x86-64, an AVX2/FMA variant. The active table is chosen once at startup
// from CPU features and can be overridden (tests pin both to compare).
//
// Results are deterministic for a fixed backend. Across backends they agree
// to rounding: FMA contraction and lane-parallel reductions change the
// summation order, so outputs are not bit-identical between backends.

#include <cstddef>
#include <span>
#include <string_view>

namespace subat::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // C[m x n] += A[m x k] * B[k x n], all row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table() noexcept;

bool available(Backend backend) noexcept;
Backend best_available() noexcept;

const KernelTable& active() noexcept;

// Throws ParameterError when the backend is unavailable on this machine.
void select(Backend backend);
Backend parse_backend(std::string_view name);  // "scalar" | "avx2" | "auto"

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  active().gemm(m, n, k, a, lda, b, ldb, c, ldc);
}

// Pins a backend for the lifetime of the guard.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active().backend) { select(b); }
  ~ScopedBackend() { select(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace subat::kernels
