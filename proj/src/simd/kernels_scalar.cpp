#include "isgd/simd/kernels.hpp"

namespace isgd::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) { return reference::dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  reference::axpy(alpha, x, y, n);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  reference::gemm_nn(a, b, c, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  reference::gemm_nt(a, b, c, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  reference::gemm_tn(a, b, c, m, k, n);
}

void tanh_fwd(const double* z, double* out, std::size_t rows, JetShape shape) {
  reference::tanh_jet_forward(z, out, rows, shape);
}

void tanh_bwd(const double* z, const double* out, const double* gout, double* gz,
              std::size_t rows, JetShape shape) {
  reference::tanh_jet_backward(z, out, gout, gz, rows, shape);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::scalar, dot,      axpy,     gemm_nn,
                                 gemm_nt,         gemm_tn,  tanh_fwd, tanh_bwd,
                                 reference::adam_update};
  return table;
}

#if !defined(ISGD_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

}  // namespace isgd::simd::detail
