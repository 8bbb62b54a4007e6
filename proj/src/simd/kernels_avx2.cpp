// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; it is entered only after a runtime CPU check.

#include "dynnet/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>

namespace dynnet::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Shared body of gemm_acc / gemm_t_acc: y[r][k] += sum_c W(r, c) x[c][k] where
// W(r, c) = w[r * rs + c * cs].
inline void gemm_strided(const double* w, std::size_t rs, std::size_t cs,
                         const double* x, double* y, std::size_t rows,
                         std::size_t cols, std::size_t batch) {
  std::size_t k0 = 0;
  for (; k0 + 16 <= batch; k0 += 16) {
    for (std::size_t r = 0; r < rows; ++r) {
      double* yr = y + r * batch + k0;
      __m256d a0 = _mm256_loadu_pd(yr);
      __m256d a1 = _mm256_loadu_pd(yr + 4);
      __m256d a2 = _mm256_loadu_pd(yr + 8);
      __m256d a3 = _mm256_loadu_pd(yr + 12);
      for (std::size_t c = 0; c < cols; ++c) {
        const __m256d wv = _mm256_set1_pd(w[r * rs + c * cs]);
        const double* xc = x + c * batch + k0;
        a0 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xc), a0);
        a1 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xc + 4), a1);
        a2 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xc + 8), a2);
        a3 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xc + 12), a3);
      }
      _mm256_storeu_pd(yr, a0);
      _mm256_storeu_pd(yr + 4, a1);
      _mm256_storeu_pd(yr + 8, a2);
      _mm256_storeu_pd(yr + 12, a3);
    }
  }
  for (; k0 + 4 <= batch; k0 += 4) {
    for (std::size_t r = 0; r < rows; ++r) {
      double* yr = y + r * batch + k0;
      __m256d a0 = _mm256_loadu_pd(yr);
      for (std::size_t c = 0; c < cols; ++c) {
        a0 = _mm256_fmadd_pd(_mm256_set1_pd(w[r * rs + c * cs]),
                             _mm256_loadu_pd(x + c * batch + k0), a0);
      }
      _mm256_storeu_pd(yr, a0);
    }
  }
  for (; k0 < batch; ++k0) {
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = y[r * batch + k0];
      for (std::size_t c = 0; c < cols; ++c) {
        acc += w[r * rs + c * cs] * x[c * batch + k0];
      }
      y[r * batch + k0] = acc;
    }
  }
}

void gemm_acc_avx2(const double* w, const double* x, double* y, std::size_t rows,
                   std::size_t cols, std::size_t batch) {
  gemm_strided(w, cols, 1, x, y, rows, cols, batch);
}

void affine_avx2(const double* w, const double* b, const double* x, double* y,
                 std::size_t rows, std::size_t cols, std::size_t batch) {
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(y + r * batch, batch, b ? b[r] : 0.0);
  }
  gemm_strided(w, cols, 1, x, y, rows, cols, batch);
}

void gemm_t_acc_avx2(const double* w, const double* ybar, double* xbar,
                     std::size_t rows, std::size_t cols, std::size_t batch) {
  // Transposed view: output rows are W's columns.
  gemm_strided(w, 1, cols, ybar, xbar, cols, rows, batch);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s0 = _mm256_add_pd(s0, _mm256_loadu_pd(a + i));
  double s = hsum(s0);
  for (; i < n; ++i) s += a[i];
  return s;
}

void outer_acc_avx2(const double* ybar, const double* x, double* wbar,
                    double* bbar, std::size_t rows, std::size_t cols,
                    std::size_t batch) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = ybar + r * batch;
    for (std::size_t c = 0; c < cols; ++c) {
      wbar[r * cols + c] += dot_avx2(yr, x + c * batch, batch);
    }
    if (bbar) bbar[r] += sum_avx2(yr, batch);
  }
}

void leaky_relu_avx2(const double* x, double* y, std::size_t n, double slope) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sv = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d pos = _mm256_cmp_pd(xv, zero, _CMP_GE_OQ);
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(_mm256_mul_pd(sv, xv), xv, pos));
  }
  for (; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_acc_avx2(const double* x, const double* g, double* out,
                              std::size_t n, double slope) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sv = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pos = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GE_OQ);
    const __m256d d = _mm256_blendv_pd(sv, one, pos);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(d, _mm256_loadu_pd(g + i),
                                              _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) out[i] += (x[i] >= 0.0 ? 1.0 : slope) * g[i];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const Kernels& avx2_kernels_table() {
  static const Kernels k{
      "avx2",          affine_avx2,
      gemm_acc_avx2,   gemm_t_acc_avx2,
      outer_acc_avx2,  leaky_relu_avx2,
      leaky_relu_grad_acc_avx2,
      dot_avx2,        axpy_avx2,
  };
  return k;
}

}  // namespace dynnet::simd
