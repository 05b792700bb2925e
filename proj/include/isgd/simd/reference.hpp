#pragma once

// Generic (scalar) reference kernels. These are the ground truth that the
// vectorized backends are checked against, and the only path for non-double
// element types such as the tangent numbers used by Hessian-vector products.

#include <cmath>
#include <cstddef>

namespace isgd::simd::reference {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc{};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// y += alpha * x
template <class T, class S>
void axpy(S alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C(MxN) += A(MxK) * B(KxN), all row-major.
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C(MxN) += A(MxK) * B(NxK)^T
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
  }
}

// C(MxN) += A(KxM)^T * B(KxN)
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T api = a[p * m + i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

/// Column layout of a jet block: `lanes()` contiguous groups of `batch`
/// columns. Group 0 holds values; for input axis a, group 1 + a*order holds
/// the first derivative along a and (order 2) group 2 + a*order the second.
struct JetShape {
  std::size_t batch = 0;
  std::size_t axes = 0;
  std::size_t order = 0;

  [[nodiscard]] constexpr std::size_t lanes() const { return 1 + axes * order; }
  [[nodiscard]] constexpr std::size_t width() const { return lanes() * batch; }
  [[nodiscard]] constexpr std::size_t d1(std::size_t axis) const { return (1 + axis * order) * batch; }
  [[nodiscard]] constexpr std::size_t d2(std::size_t axis) const { return (2 + axis * order) * batch; }
  friend constexpr bool operator==(const JetShape&, const JetShape&) = default;
};

// Pushes a jet through tanh, row by row:
//   value  t = tanh(z)
//   d1     s z1                 with s = tanh'(z) = 1 - t^2
//   d2     q z1^2 + s z2        with q = tanh''(z) = -2 t s
template <class T>
void tanh_jet_forward(const T* z, T* out, std::size_t rows, JetShape shape) {
  using std::tanh;
  const std::size_t w = shape.width();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* zr = z + r * w;
    T* orow = out + r * w;
    for (std::size_t j = 0; j < shape.batch; ++j) {
      const T t = tanh(zr[j]);
      const T s = T(1.0) - t * t;
      const T q = T(-2.0) * t * s;
      orow[j] = t;
      for (std::size_t a = 0; a < shape.axes; ++a) {
        const T z1 = zr[shape.d1(a) + j];
        orow[shape.d1(a) + j] = s * z1;
        if (shape.order == 2) {
          const T z2 = zr[shape.d2(a) + j];
          orow[shape.d2(a) + j] = q * z1 * z1 + s * z2;
        }
      }
    }
  }
}

// Adjoint of tanh_jet_forward; accumulates into gz. `out` is the forward
// result (lane 0 supplies tanh(z)).
template <class T>
void tanh_jet_backward(const T* z, const T* out, const T* gout, T* gz, std::size_t rows,
                       JetShape shape) {
  const std::size_t w = shape.width();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* zr = z + r * w;
    const T* gr = gout + r * w;
    T* gzr = gz + r * w;
    for (std::size_t j = 0; j < shape.batch; ++j) {
      const T t = out[r * w + j];
      const T s = T(1.0) - t * t;
      const T q = T(-2.0) * t * s;
      const T c = T(-2.0) * s * (s - T(2.0) * t * t);
      T g0 = gr[j] * s;
      for (std::size_t a = 0; a < shape.axes; ++a) {
        const std::size_t i1 = shape.d1(a) + j;
        const T z1 = zr[i1];
        const T g1 = gr[i1];
        if (shape.order == 2) {
          const std::size_t i2 = shape.d2(a) + j;
          const T z2 = zr[i2];
          const T g2 = gr[i2];
          g0 += g1 * q * z1 + g2 * (c * z1 * z1 + q * z2);
          gzr[i1] += g1 * s + g2 * T(2.0) * q * z1;
          gzr[i2] += g2 * s;
        } else {
          g0 += g1 * q * z1;
          gzr[i1] += g1 * s;
        }
      }
      gzr[j] += g0;
    }
  }
}

struct AdamCoefficients {
  double beta1;
  double beta2;
  double eps;
  double step;         // learning rate scaled by the first-moment bias correction
  double inv_bias2;    // 1 / (1 - beta2^t)
};

// In-place Adam moment update and parameter step:
//   m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2
//   theta <- theta - step * m / (sqrt(v * inv_bias2) + eps)
inline void adam_update(double* theta, double* m, double* v, const double* g, std::size_t n,
                        const AdamCoefficients& c) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    theta[i] -= c.step * m[i] / (std::sqrt(v[i] * c.inv_bias2) + c.eps);
  }
}

}  // namespace isgd::simd::reference
