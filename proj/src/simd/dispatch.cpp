#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "isgd/simd/kernels.hpp"

namespace isgd::simd {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("ISGD_SIMD")) {
    const std::string want{env};
    if (want == "scalar") return &detail::scalar_table();
    if (want == "avx2") return &kernels_for(Backend::avx2);
    throw std::runtime_error("ISGD_SIMD must be 'scalar' or 'avx2', got '" + want + "'");
  }
  if (backend_available(Backend::avx2)) return detail::avx2_table();
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return detail::avx2_table() != nullptr && cpu_has_avx2_fma();
  }
  return false;
}

const KernelTable& kernels_for(Backend b) {
  if (!backend_available(b)) {
    throw std::runtime_error("SIMD backend '" + std::string(backend_name(b)) +
                             "' is not available on this CPU/build");
  }
  return b == Backend::avx2 ? *detail::avx2_table() : detail::scalar_table();
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

void select_backend(Backend b) { active().store(&kernels_for(b), std::memory_order_release); }

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace isgd::simd
