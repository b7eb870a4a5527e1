#include "macrpo/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#define MACRPO_AVX2 __attribute__((target("avx2,fma")))

namespace macrpo::kernels {
namespace {

MACRPO_AVX2 inline double fma1(double a, double b, double c) {
  return _mm_cvtsd_f64(_mm_fmadd_sd(_mm_set_sd(a), _mm_set_sd(b), _mm_set_sd(c)));
}

MACRPO_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  // (l0 + l1) + (l2 + l3)
  const __m128d a = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
  const __m128d b = _mm_add_sd(hi, _mm_unpackhi_pd(hi, hi));
  return _mm_cvtsd_f64(_mm_add_sd(a, b));
}

// Element (r, j) is always fma-chained over p = 0..k-1 starting from y(r, j).
MACRPO_AVX2 void gemm_acc(const double* x, std::size_t rows, std::size_t k,
                          const double* w, std::size_t n, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* x0 = x + (r + 0) * k;
    const double* x1 = x + (r + 1) * k;
    const double* x2 = x + (r + 2) * k;
    const double* x3 = x + (r + 3) * k;
    double* y0 = y + (r + 0) * n;
    double* y1 = y + (r + 1) * n;
    double* y2 = y + (r + 2) * n;
    double* y3 = y + (r + 3) * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d a0 = _mm256_loadu_pd(y0 + j), b0 = _mm256_loadu_pd(y0 + j + 4);
      __m256d a1 = _mm256_loadu_pd(y1 + j), b1 = _mm256_loadu_pd(y1 + j + 4);
      __m256d a2 = _mm256_loadu_pd(y2 + j), b2 = _mm256_loadu_pd(y2 + j + 4);
      __m256d a3 = _mm256_loadu_pd(y3 + j), b3 = _mm256_loadu_pd(y3 + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d wa = _mm256_loadu_pd(w + p * n + j);
        const __m256d wb = _mm256_loadu_pd(w + p * n + j + 4);
        __m256d s = _mm256_broadcast_sd(x0 + p);
        a0 = _mm256_fmadd_pd(s, wa, a0);
        b0 = _mm256_fmadd_pd(s, wb, b0);
        s = _mm256_broadcast_sd(x1 + p);
        a1 = _mm256_fmadd_pd(s, wa, a1);
        b1 = _mm256_fmadd_pd(s, wb, b1);
        s = _mm256_broadcast_sd(x2 + p);
        a2 = _mm256_fmadd_pd(s, wa, a2);
        b2 = _mm256_fmadd_pd(s, wb, b2);
        s = _mm256_broadcast_sd(x3 + p);
        a3 = _mm256_fmadd_pd(s, wa, a3);
        b3 = _mm256_fmadd_pd(s, wb, b3);
      }
      _mm256_storeu_pd(y0 + j, a0); _mm256_storeu_pd(y0 + j + 4, b0);
      _mm256_storeu_pd(y1 + j, a1); _mm256_storeu_pd(y1 + j + 4, b1);
      _mm256_storeu_pd(y2 + j, a2); _mm256_storeu_pd(y2 + j + 4, b2);
      _mm256_storeu_pd(y3 + j, a3); _mm256_storeu_pd(y3 + j + 4, b3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d a0 = _mm256_loadu_pd(y0 + j), a1 = _mm256_loadu_pd(y1 + j);
      __m256d a2 = _mm256_loadu_pd(y2 + j), a3 = _mm256_loadu_pd(y3 + j);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d wa = _mm256_loadu_pd(w + p * n + j);
        a0 = _mm256_fmadd_pd(_mm256_broadcast_sd(x0 + p), wa, a0);
        a1 = _mm256_fmadd_pd(_mm256_broadcast_sd(x1 + p), wa, a1);
        a2 = _mm256_fmadd_pd(_mm256_broadcast_sd(x2 + p), wa, a2);
        a3 = _mm256_fmadd_pd(_mm256_broadcast_sd(x3 + p), wa, a3);
      }
      _mm256_storeu_pd(y0 + j, a0); _mm256_storeu_pd(y1 + j, a1);
      _mm256_storeu_pd(y2 + j, a2); _mm256_storeu_pd(y3 + j, a3);
    }
    for (; j < n; ++j) {
      for (std::size_t q = 0; q < 4; ++q) {
        const double* xq = x + (r + q) * k;
        double acc = y[(r + q) * n + j];
        for (std::size_t p = 0; p < k; ++p) acc = fma1(xq[p], w[p * n + j], acc);
        y[(r + q) * n + j] = acc;
      }
    }
  }
  for (; r < rows; ++r) {
    const double* xr = x + r * k;
    double* yr = y + r * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d a = _mm256_loadu_pd(yr + j);
      for (std::size_t p = 0; p < k; ++p)
        a = _mm256_fmadd_pd(_mm256_broadcast_sd(xr + p), _mm256_loadu_pd(w + p * n + j), a);
      _mm256_storeu_pd(yr + j, a);
    }
    for (; j < n; ++j) {
      double acc = yr[j];
      for (std::size_t p = 0; p < k; ++p) acc = fma1(xr[p], w[p * n + j], acc);
      yr[j] = acc;
    }
  }
}

// One dot product of length n with a single 4-lane accumulator, lanes reduced
// as (l0 + l1) + (l2 + l3), remaining terms fma-chained.
MACRPO_AVX2 inline double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc);
  double s = hsum(acc);
  for (; j < n; ++j) s = fma1(a[j], b[j], s);
  return s;
}

MACRPO_AVX2 void gemm_nt_acc(const double* dy, std::size_t rows, std::size_t n,
                             const double* w, std::size_t k, double* dx) {
  const std::size_t n4 = n & ~std::size_t{3};
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* d0 = dy + (r + 0) * n;
    const double* d1 = dy + (r + 1) * n;
    const double* d2 = dy + (r + 2) * n;
    const double* d3 = dy + (r + 3) * n;
    std::size_t p = 0;
    for (; p + 2 <= k; p += 2) {
      const double* wa = w + p * n;
      const double* wb = w + (p + 1) * n;
      __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
      __m256d b0 = _mm256_setzero_pd(), b1 = _mm256_setzero_pd();
      __m256d b2 = _mm256_setzero_pd(), b3 = _mm256_setzero_pd();
      for (std::size_t j = 0; j < n4; j += 4) {
        const __m256d va = _mm256_loadu_pd(wa + j);
        const __m256d vb = _mm256_loadu_pd(wb + j);
        __m256d g = _mm256_loadu_pd(d0 + j);
        a0 = _mm256_fmadd_pd(g, va, a0);
        b0 = _mm256_fmadd_pd(g, vb, b0);
        g = _mm256_loadu_pd(d1 + j);
        a1 = _mm256_fmadd_pd(g, va, a1);
        b1 = _mm256_fmadd_pd(g, vb, b1);
        g = _mm256_loadu_pd(d2 + j);
        a2 = _mm256_fmadd_pd(g, va, a2);
        b2 = _mm256_fmadd_pd(g, vb, b2);
        g = _mm256_loadu_pd(d3 + j);
        a3 = _mm256_fmadd_pd(g, va, a3);
        b3 = _mm256_fmadd_pd(g, vb, b3);
      }
      double sa[4] = {hsum(a0), hsum(a1), hsum(a2), hsum(a3)};
      double sb[4] = {hsum(b0), hsum(b1), hsum(b2), hsum(b3)};
      const double* dq[4] = {d0, d1, d2, d3};
      for (std::size_t q = 0; q < 4; ++q) {
        for (std::size_t j = n4; j < n; ++j) {
          sa[q] = fma1(dq[q][j], wa[j], sa[q]);
          sb[q] = fma1(dq[q][j], wb[j], sb[q]);
        }
        dx[(r + q) * k + p] += sa[q];
        dx[(r + q) * k + p + 1] += sb[q];
      }
    }
    for (; p < k; ++p) {
      for (std::size_t q = 0; q < 4; ++q)
        dx[(r + q) * k + p] += dot(dy + (r + q) * n, w + p * n, n);
    }
  }
  for (; r < rows; ++r) {
    for (std::size_t p = 0; p < k; ++p) dx[r * k + p] += dot(dy + r * n, w + p * n, n);
  }
}

// Element (p, j) is fma-chained over r = 0..rows-1 starting from dw(p, j).
MACRPO_AVX2 void gemm_tn_acc(const double* x, std::size_t rows, std::size_t k,
                             const double* dy, std::size_t n, double* dw) {
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    double* w0 = dw + (p + 0) * n;
    double* w1 = dw + (p + 1) * n;
    double* w2 = dw + (p + 2) * n;
    double* w3 = dw + (p + 3) * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d a0 = _mm256_loadu_pd(w0 + j), b0 = _mm256_loadu_pd(w0 + j + 4);
      __m256d a1 = _mm256_loadu_pd(w1 + j), b1 = _mm256_loadu_pd(w1 + j + 4);
      __m256d a2 = _mm256_loadu_pd(w2 + j), b2 = _mm256_loadu_pd(w2 + j + 4);
      __m256d a3 = _mm256_loadu_pd(w3 + j), b3 = _mm256_loadu_pd(w3 + j + 4);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * k + p;
        const __m256d ga = _mm256_loadu_pd(dy + r * n + j);
        const __m256d gb = _mm256_loadu_pd(dy + r * n + j + 4);
        __m256d s = _mm256_broadcast_sd(xr + 0);
        a0 = _mm256_fmadd_pd(s, ga, a0);
        b0 = _mm256_fmadd_pd(s, gb, b0);
        s = _mm256_broadcast_sd(xr + 1);
        a1 = _mm256_fmadd_pd(s, ga, a1);
        b1 = _mm256_fmadd_pd(s, gb, b1);
        s = _mm256_broadcast_sd(xr + 2);
        a2 = _mm256_fmadd_pd(s, ga, a2);
        b2 = _mm256_fmadd_pd(s, gb, b2);
        s = _mm256_broadcast_sd(xr + 3);
        a3 = _mm256_fmadd_pd(s, ga, a3);
        b3 = _mm256_fmadd_pd(s, gb, b3);
      }
      _mm256_storeu_pd(w0 + j, a0); _mm256_storeu_pd(w0 + j + 4, b0);
      _mm256_storeu_pd(w1 + j, a1); _mm256_storeu_pd(w1 + j + 4, b1);
      _mm256_storeu_pd(w2 + j, a2); _mm256_storeu_pd(w2 + j + 4, b2);
      _mm256_storeu_pd(w3 + j, a3); _mm256_storeu_pd(w3 + j + 4, b3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d a0 = _mm256_loadu_pd(w0 + j), a1 = _mm256_loadu_pd(w1 + j);
      __m256d a2 = _mm256_loadu_pd(w2 + j), a3 = _mm256_loadu_pd(w3 + j);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * k + p;
        const __m256d g = _mm256_loadu_pd(dy + r * n + j);
        a0 = _mm256_fmadd_pd(_mm256_broadcast_sd(xr + 0), g, a0);
        a1 = _mm256_fmadd_pd(_mm256_broadcast_sd(xr + 1), g, a1);
        a2 = _mm256_fmadd_pd(_mm256_broadcast_sd(xr + 2), g, a2);
        a3 = _mm256_fmadd_pd(_mm256_broadcast_sd(xr + 3), g, a3);
      }
      _mm256_storeu_pd(w0 + j, a0); _mm256_storeu_pd(w1 + j, a1);
      _mm256_storeu_pd(w2 + j, a2); _mm256_storeu_pd(w3 + j, a3);
    }
    for (; j < n; ++j) {
      for (std::size_t q = 0; q < 4; ++q) {
        double acc = dw[(p + q) * n + j];
        for (std::size_t r = 0; r < rows; ++r) acc = fma1(x[r * k + p + q], dy[r * n + j], acc);
        dw[(p + q) * n + j] = acc;
      }
    }
  }
  for (; p < k; ++p) {
    double* wp = dw + p * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d a = _mm256_loadu_pd(wp + j);
      for (std::size_t r = 0; r < rows; ++r)
        a = _mm256_fmadd_pd(_mm256_broadcast_sd(x + r * k + p), _mm256_loadu_pd(dy + r * n + j), a);
      _mm256_storeu_pd(wp + j, a);
    }
    for (; j < n; ++j) {
      double acc = wp[j];
      for (std::size_t r = 0; r < rows; ++r) acc = fma1(x[r * k + p], dy[r * n + j], acc);
      wp[j] = acc;
    }
  }
}

MACRPO_AVX2 double sum_squares(const double* a, std::size_t n) {
  return dot(a, a, n);
}

MACRPO_AVX2 void scale(double* a, std::size_t n, double factor) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(a + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), f));
  for (; i < n; ++i) a[i] *= factor;
}

// Same operation order as the scalar reference and no fused ops, so results are
// bit-identical to it.
MACRPO_AVX2 void adam_update(double* w, double* g, double* m, double* v,
                             std::size_t n, const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    _mm256_storeu_pd(g + i, zero);
  }
  if (i < n) scalar_table().adam_update(w + i, g + i, m + i, v + i, n - i, c);
}

constexpr KernelTable kAvx2{
    "avx2", gemm_acc, gemm_nt_acc, gemm_tn_acc, sum_squares, scale, adam_update};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace macrpo::kernels

#else

namespace macrpo::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace macrpo::kernels

#endif
