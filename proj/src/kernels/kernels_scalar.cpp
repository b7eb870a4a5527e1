#include <cmath>

#include "macrpo/kernels.hpp"

namespace macrpo::kernels {
namespace {

void gemm_acc(const double* x, std::size_t rows, std::size_t k,
              const double* w, std::size_t n, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * k;
    double* yr = y + r * n;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = yr[j];
      for (std::size_t p = 0; p < k; ++p) acc += xr[p] * w[p * n + j];
      yr[j] = acc;
    }
  }
}

void gemm_nt_acc(const double* dy, std::size_t rows, std::size_t n,
                 const double* w, std::size_t k, double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * n;
    double* dxr = dx + r * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* wp = w + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += dyr[j] * wp[j];
      dxr[p] += acc;
    }
  }
}

void gemm_tn_acc(const double* x, std::size_t rows, std::size_t k,
                 const double* dy, std::size_t n, double* dw) {
  for (std::size_t p = 0; p < k; ++p) {
    double* dwp = dw + p * n;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = dwp[j];
      for (std::size_t r = 0; r < rows; ++r) acc += x[r * k + p] * dy[r * n + j];
      dwp[j] = acc;
    }
  }
}

double sum_squares(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

void scale(double* a, std::size_t n, double factor) {
  for (std::size_t i = 0; i < n; ++i) a[i] *= factor;
}

void adam_update(double* w, double* g, double* m, double* v, std::size_t n,
                 const AdamCoeffs& c) {
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = c.beta1 * m[i] + one_m_b1 * gi;
    const double vi = c.beta2 * v[i] + one_m_b2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double m_hat = mi / c.bias_correction1;
    const double v_hat = vi / c.bias_correction2;
    w[i] = w[i] - (c.lr * m_hat) / (std::sqrt(v_hat) + c.eps);
    g[i] = 0.0;
  }
}

constexpr KernelTable kScalar{
    "scalar", gemm_acc, gemm_nt_acc, gemm_tn_acc, sum_squares, scale, adam_update};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace macrpo::kernels
