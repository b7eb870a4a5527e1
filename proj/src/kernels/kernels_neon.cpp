#include "macrpo/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

#include <cmath>

namespace macrpo::kernels {
namespace {

inline double fma1(double a, double b, double c) { return std::fma(a, b, c); }

void gemm_acc(const double* x, std::size_t rows, std::size_t k,
              const double* w, std::size_t n, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * k;
    double* yr = y + r * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      float64x2_t a = vld1q_f64(yr + j);
      float64x2_t b = vld1q_f64(yr + j + 2);
      for (std::size_t p = 0; p < k; ++p) {
        const float64x2_t s = vdupq_n_f64(xr[p]);
        a = vfmaq_f64(a, s, vld1q_f64(w + p * n + j));
        b = vfmaq_f64(b, s, vld1q_f64(w + p * n + j + 2));
      }
      vst1q_f64(yr + j, a);
      vst1q_f64(yr + j + 2, b);
    }
    for (; j < n; ++j) {
      double acc = yr[j];
      for (std::size_t p = 0; p < k; ++p) acc = fma1(xr[p], w[p * n + j], acc);
      yr[j] = acc;
    }
  }
}

inline double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) acc = vfmaq_f64(acc, vld1q_f64(a + j), vld1q_f64(b + j));
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; j < n; ++j) s = fma1(a[j], b[j], s);
  return s;
}

void gemm_nt_acc(const double* dy, std::size_t rows, std::size_t n,
                 const double* w, std::size_t k, double* dx) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = 0; p < k; ++p) dx[r * k + p] += dot(dy + r * n, w + p * n, n);
}

void gemm_tn_acc(const double* x, std::size_t rows, std::size_t k,
                 const double* dy, std::size_t n, double* dw) {
  for (std::size_t p = 0; p < k; ++p) {
    double* wp = dw + p * n;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      float64x2_t a = vld1q_f64(wp + j);
      for (std::size_t r = 0; r < rows; ++r)
        a = vfmaq_f64(a, vdupq_n_f64(x[r * k + p]), vld1q_f64(dy + r * n + j));
      vst1q_f64(wp + j, a);
    }
    for (; j < n; ++j) {
      double acc = wp[j];
      for (std::size_t r = 0; r < rows; ++r) acc = fma1(x[r * k + p], dy[r * n + j], acc);
      wp[j] = acc;
    }
  }
}

double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

void scale(double* a, std::size_t n, double factor) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(a + i, vmulq_n_f64(vld1q_f64(a + i), factor));
  for (; i < n; ++i) a[i] *= factor;
}

void adam_update(double* w, double* g, double* m, double* v, std::size_t n,
                 const AdamCoeffs& c) {
  const float64x2_t b1 = vdupq_n_f64(c.beta1), b2 = vdupq_n_f64(c.beta2);
  const float64x2_t omb1 = vdupq_n_f64(1.0 - c.beta1), omb2 = vdupq_n_f64(1.0 - c.beta2);
  const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1), bc2 = vdupq_n_f64(c.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(c.lr), eps = vdupq_n_f64(c.eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, gi));
    const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(omb2, vmulq_f64(gi, gi)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, vdivq_f64(mi, bc1)),
                                       vaddq_f64(vsqrtq_f64(vdivq_f64(vi, bc2)), eps));
    vst1q_f64(w + i, vsubq_f64(vld1q_f64(w + i), step));
    vst1q_f64(g + i, vdupq_n_f64(0.0));
  }
  if (i < n) scalar_table().adam_update(w + i, g + i, m + i, v + i, n - i, c);
}

constexpr KernelTable kNeon{
    "neon", gemm_acc, gemm_nt_acc, gemm_tn_acc, sum_squares, scale, adam_update};

}  // namespace

const KernelTable* neon_table() { return &kNeon; }

}  // namespace macrpo::kernels

#else

namespace macrpo::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace macrpo::kernels

#endif
