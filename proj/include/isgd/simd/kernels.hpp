#pragma once

// Runtime-dispatched double-precision kernels for the dense inner loops:
// matrix products on the tape, the tanh jet, and vector updates in the
// optimizers. A scalar reference backend is always present; the AVX2+FMA
// backend is picked at first use when the CPU reports support for it.
//
// Backends are expected to agree to rounding (FMA contraction changes the
// last bits), not bit-for-bit. Within one process the selected backend is
// fixed unless a caller overrides it, so results are reproducible.

#include <cstddef>
#include <string_view>

#include "isgd/simd/reference.hpp"

namespace isgd::simd {

using reference::AdamCoefficients;
using reference::JetShape;

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  void (*tanh_jet_forward)(const double* z, double* out, std::size_t rows, JetShape shape);
  void (*tanh_jet_backward)(const double* z, const double* out, const double* gout, double* gz,
                            std::size_t rows, JetShape shape);
  void (*adam_update)(double* theta, double* m, double* v, const double* g, std::size_t n,
                      const AdamCoefficients& c);
};

[[nodiscard]] bool backend_available(Backend b);

/// Kernel table of a specific backend; throws std::runtime_error if the CPU
/// cannot run it.
[[nodiscard]] const KernelTable& kernels_for(Backend b);

/// The active table. First call chooses avx2 when available, unless the
/// ISGD_SIMD environment variable is set to "scalar".
[[nodiscard]] const KernelTable& kernels();

/// Replace the active backend (tests, benchmarking).
void select_backend(Backend b);

[[nodiscard]] std::string_view backend_name(Backend b);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace isgd::simd
