#include <atomic>

#include "kernels_impl.hpp"
#include "subat/error.hpp"
#include "subat/kernels.hpp"

namespace subat::kernels {

namespace {

constexpr KernelTable kScalarTable{Backend::kScalar, "scalar", &scalar::dot, &scalar::axpy,
                                   &scalar::gemm};

#if defined(SUBAT_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Backend::kAvx2, "avx2", &avx2::dot, &avx2::axpy, &avx2::gemm};

bool cpu_supports_avx2() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* table_for(Backend b) noexcept {
  switch (b) {
    case Backend::kScalar:
      return &kScalarTable;
    case Backend::kAvx2:
      return avx2_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{table_for(best_available())};
  return slot;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalarTable; }

const KernelTable* avx2_table() noexcept {
#if defined(SUBAT_HAVE_AVX2)
  static const bool supported = cpu_supports_avx2();
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

bool available(Backend backend) noexcept { return table_for(backend) != nullptr; }

Backend best_available() noexcept {
  return available(Backend::kAvx2) ? Backend::kAvx2 : Backend::kScalar;
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_acquire); }

void select(Backend backend) {
  const KernelTable* t = table_for(backend);
  if (t == nullptr) throw ParameterError("kernel backend not available on this machine");
  active_slot().store(t, std::memory_order_release);
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "auto") return best_available();
  throw ParameterError("unknown kernel backend '" + std::string(name) + "'");
}

}  // namespace subat::kernels
