// AVX2 + FMA backend. This translation unit is compiled with -mavx2 -mfma;
// nothing in it may run before dispatch has confirmed CPU support.

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "isgd/simd/kernels.hpp"

namespace isgd::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// crow += sum_{q<4} coef[q] * rows[q]
inline void axpy4(const double* coef, const double* const* rows, double* crow, std::size_t n) {
  const __m256d c0 = _mm256_set1_pd(coef[0]);
  const __m256d c1 = _mm256_set1_pd(coef[1]);
  const __m256d c2 = _mm256_set1_pd(coef[2]);
  const __m256d c3 = _mm256_set1_pd(coef[3]);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(crow + j);
    acc = _mm256_fmadd_pd(c0, _mm256_loadu_pd(rows[0] + j), acc);
    acc = _mm256_fmadd_pd(c1, _mm256_loadu_pd(rows[1] + j), acc);
    acc = _mm256_fmadd_pd(c2, _mm256_loadu_pd(rows[2] + j), acc);
    acc = _mm256_fmadd_pd(c3, _mm256_loadu_pd(rows[3] + j), acc);
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < n; ++j) {
    crow[j] += coef[0] * rows[0][j] + coef[1] * rows[1][j] + coef[2] * rows[2][j] +
               coef[3] * rows[3][j];
  }
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double* rows[4] = {b + p * n, b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n};
      axpy4(arow + p, rows, crow, n);
    }
    for (; p < k; ++p) axpy(arow[p], b + p * n, crow, n);
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const double* rows[4] = {b + p * n, b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n};
    for (std::size_t i = 0; i < m; ++i) {
      const double coef[4] = {a[p * m + i], a[(p + 1) * m + i], a[(p + 2) * m + i],
                              a[(p + 3) * m + i]};
      axpy4(coef, rows, c + i * n, n);
    }
  }
  for (; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) axpy(a[p * m + i], b + p * n, c + i * n, n);
  }
}

void tanh_fwd(const double* z, double* out, std::size_t rows, JetShape shape) {
  const std::size_t w = shape.width();
  const std::size_t nb = shape.batch;
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d m2 = _mm256_set1_pd(-2.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z + r * w;
    double* orow = out + r * w;
    for (std::size_t j = 0; j < nb; ++j) orow[j] = std::tanh(zr[j]);
    if (shape.axes == 0 || shape.order == 0) continue;
    std::size_t j = 0;
    for (; j + 4 <= nb; j += 4) {
      const __m256d t = _mm256_loadu_pd(orow + j);
      const __m256d s = _mm256_fnmadd_pd(t, t, one);
      const __m256d q = _mm256_mul_pd(_mm256_mul_pd(m2, t), s);
      for (std::size_t a = 0; a < shape.axes; ++a) {
        const __m256d z1 = _mm256_loadu_pd(zr + shape.d1(a) + j);
        _mm256_storeu_pd(orow + shape.d1(a) + j, _mm256_mul_pd(s, z1));
        if (shape.order == 2) {
          const __m256d z2 = _mm256_loadu_pd(zr + shape.d2(a) + j);
          const __m256d v = _mm256_fmadd_pd(_mm256_mul_pd(q, z1), z1, _mm256_mul_pd(s, z2));
          _mm256_storeu_pd(orow + shape.d2(a) + j, v);
        }
      }
    }
    for (; j < nb; ++j) {
      const double t = orow[j];
      const double s = 1.0 - t * t;
      const double q = -2.0 * t * s;
      for (std::size_t a = 0; a < shape.axes; ++a) {
        const double z1 = zr[shape.d1(a) + j];
        orow[shape.d1(a) + j] = s * z1;
        if (shape.order == 2) orow[shape.d2(a) + j] = q * z1 * z1 + s * zr[shape.d2(a) + j];
      }
    }
  }
}

void tanh_bwd(const double* z, const double* out, const double* gout, double* gz,
              std::size_t rows, JetShape shape) {
  const std::size_t w = shape.width();
  const std::size_t nb = shape.batch;
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d m2 = _mm256_set1_pd(-2.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z + r * w;
    const double* orow = out + r * w;
    const double* gr = gout + r * w;
    double* gzr = gz + r * w;
    std::size_t j = 0;
    for (; j + 4 <= nb; j += 4) {
      const __m256d t = _mm256_loadu_pd(orow + j);
      const __m256d s = _mm256_fnmadd_pd(t, t, one);
      const __m256d q = _mm256_mul_pd(_mm256_mul_pd(m2, t), s);
      // c = -2 s (s - 2 t^2)
      const __m256d c =
          _mm256_mul_pd(_mm256_mul_pd(m2, s), _mm256_fnmadd_pd(_mm256_mul_pd(two, t), t, s));
      __m256d g0 = _mm256_mul_pd(_mm256_loadu_pd(gr + j), s);
      for (std::size_t a = 0; a < shape.axes && shape.order > 0; ++a) {
        const std::size_t i1 = shape.d1(a) + j;
        const __m256d z1 = _mm256_loadu_pd(zr + i1);
        const __m256d g1 = _mm256_loadu_pd(gr + i1);
        g0 = _mm256_fmadd_pd(_mm256_mul_pd(g1, q), z1, g0);
        __m256d gz1 = _mm256_fmadd_pd(g1, s, _mm256_loadu_pd(gzr + i1));
        if (shape.order == 2) {
          const std::size_t i2 = shape.d2(a) + j;
          const __m256d z2 = _mm256_loadu_pd(zr + i2);
          const __m256d g2 = _mm256_loadu_pd(gr + i2);
          const __m256d inner = _mm256_fmadd_pd(_mm256_mul_pd(c, z1), z1, _mm256_mul_pd(q, z2));
          g0 = _mm256_fmadd_pd(g2, inner, g0);
          gz1 = _mm256_fmadd_pd(_mm256_mul_pd(g2, two), _mm256_mul_pd(q, z1), gz1);
          _mm256_storeu_pd(gzr + i2, _mm256_fmadd_pd(g2, s, _mm256_loadu_pd(gzr + i2)));
        }
        _mm256_storeu_pd(gzr + i1, gz1);
      }
      _mm256_storeu_pd(gzr + j, _mm256_add_pd(_mm256_loadu_pd(gzr + j), g0));
    }
    for (; j < nb; ++j) {
      const double t = orow[j];
      const double s = 1.0 - t * t;
      const double q = -2.0 * t * s;
      const double c = -2.0 * s * (s - 2.0 * t * t);
      double g0 = gr[j] * s;
      for (std::size_t a = 0; a < shape.axes && shape.order > 0; ++a) {
        const std::size_t i1 = shape.d1(a) + j;
        const double z1 = zr[i1];
        const double g1 = gr[i1];
        g0 += g1 * q * z1;
        gzr[i1] += g1 * s;
        if (shape.order == 2) {
          const std::size_t i2 = shape.d2(a) + j;
          const double g2 = gr[i2];
          g0 += g2 * (c * z1 * z1 + q * zr[i2]);
          gzr[i1] += g2 * 2.0 * q * z1;
          gzr[i2] += g2 * s;
        }
      }
      gzr[j] += g0;
    }
  }
}

void adam_update(double* theta, double* m, double* v, const double* g, std::size_t n,
                 const AdamCoefficients& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d eps = _mm256_set1_pd(c.eps);
  const __m256d step = _mm256_set1_pd(c.step);
  const __m256d ib2 = _mm256_set1_pd(c.inv_bias2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(ob1, gi));
    const __m256d vi =
        _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(ob2, _mm256_mul_pd(gi, gi)));
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, ib2)), eps);
    const __m256d th = _mm256_fnmadd_pd(step, _mm256_div_pd(mi, denom), _mm256_loadu_pd(theta + i));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    _mm256_storeu_pd(theta + i, th);
  }
  if (i < n) reference::adam_update(theta + i, m + i, v + i, g + i, n - i, c);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Backend::avx2, dot,      axpy,     gemm_nn,    gemm_nt,
                                 gemm_tn,       tanh_fwd, tanh_bwd, adam_update};
  return &table;
}

}  // namespace isgd::simd::detail
