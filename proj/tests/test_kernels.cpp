#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "macrpo/kernels.hpp"
#include "macrpo/random.hpp"

using namespace macrpo;
using kernels::KernelTable;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return v;
}

std::vector<const KernelTable*> simd_tables() {
  std::vector<const KernelTable*> out;
  if (kernels::backend_supported(kernels::Backend::kAvx2)) out.push_back(kernels::avx2_table());
  if (kernels::backend_supported(kernels::Backend::kNeon)) out.push_back(kernels::neon_table());
  return out;
}

std::vector<const KernelTable*> all_tables() {
  std::vector<const KernelTable*> out{&kernels::scalar_table()};
  for (const KernelTable* t : simd_tables()) out.push_back(t);
  return out;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol * (1.0 + std::abs(b[i]))) << "index " << i;
}

}  // namespace

TEST(Kernels, ScalarGemmMatchesNaiveProducts) {
  Rng rng = make_rng(1);
  const std::size_t rows = 3, k = 4, n = 5;
  const auto x = random_vec(rng, rows * k), w = random_vec(rng, k * n);
  std::vector<double> y(rows * n, 0.5);
  kernels::scalar_table().gemm_acc(x.data(), rows, k, w.data(), n, y.data());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.5;
      for (std::size_t p = 0; p < k; ++p) s += x[r * k + p] * w[p * n + j];
      EXPECT_NEAR(y[r * n + j], s, 1e-14);
    }
  }
}

TEST(Kernels, SimdGemmsMatchScalarReference) {
  Rng rng = make_rng(2);
  const KernelTable& ref = kernels::scalar_table();
  for (const KernelTable* t : simd_tables()) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t rows = 1 + rng() % 9, k = 1 + rng() % 21, n = 1 + rng() % 21;
      const auto x = random_vec(rng, rows * k), w = random_vec(rng, k * n), dy = random_vec(rng, rows * n);
      auto y0 = random_vec(rng, rows * n), y1 = y0;
      ref.gemm_acc(x.data(), rows, k, w.data(), n, y0.data());
      t->gemm_acc(x.data(), rows, k, w.data(), n, y1.data());
      expect_close(y1, y0, 1e-13);

      auto dx0 = random_vec(rng, rows * k), dx1 = dx0;
      ref.gemm_nt_acc(dy.data(), rows, n, w.data(), k, dx0.data());
      t->gemm_nt_acc(dy.data(), rows, n, w.data(), k, dx1.data());
      expect_close(dx1, dx0, 1e-13);

      auto dw0 = random_vec(rng, k * n), dw1 = dw0;
      ref.gemm_tn_acc(x.data(), rows, k, dy.data(), n, dw0.data());
      t->gemm_tn_acc(x.data(), rows, k, dy.data(), n, dw1.data());
      expect_close(dw1, dw0, 1e-13);

      const auto a = random_vec(rng, k * n);
      EXPECT_NEAR(t->sum_squares(a.data(), a.size()), ref.sum_squares(a.data(), a.size()), 1e-12);
    }
  }
}

TEST(Kernels, ScaleAndAdamAreBitIdenticalAcrossBackends) {
  Rng rng = make_rng(3);
  const kernels::AdamCoeffs c{0.005, 0.9, 0.999, 1e-8, 1.0 - 0.9 * 0.9, 1.0 - 0.999 * 0.999};
  for (const KernelTable* t : simd_tables()) {
    for (std::size_t n : {1u, 3u, 4u, 7u, 16u, 33u}) {
      auto a0 = random_vec(rng, n), a1 = a0;
      kernels::scalar_table().scale(a0.data(), n, 0.37);
      t->scale(a1.data(), n, 0.37);
      EXPECT_EQ(a0, a1);

      auto w0 = random_vec(rng, n), g0 = random_vec(rng, n), m0 = random_vec(rng, n), v0 = random_vec(rng, n);
      for (double& v : v0) v = std::abs(v);
      auto w1 = w0, g1 = g0, m1 = m0, v1 = v0;
      kernels::scalar_table().adam_update(w0.data(), g0.data(), m0.data(), v0.data(), n, c);
      t->adam_update(w1.data(), g1.data(), m1.data(), v1.data(), n, c);
      EXPECT_EQ(w0, w1);
      EXPECT_EQ(m0, m1);
      EXPECT_EQ(v0, v1);
      EXPECT_EQ(g1, std::vector<double>(n, 0.0));
    }
  }
}

// A row evaluated alone or inside a batch of any size gives the same bits.
TEST(Kernels, RowResultsDoNotDependOnBatchSize) {
  Rng rng = make_rng(4);
  for (const KernelTable* t : all_tables()) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t rows = 2 + rng() % 8, k = 1 + rng() % 17, n = 1 + rng() % 17;
      const auto x = random_vec(rng, rows * k), w = random_vec(rng, k * n), dy = random_vec(rng, rows * n);
      std::vector<double> y(rows * n, 0.0), dx(rows * k, 0.0);
      t->gemm_acc(x.data(), rows, k, w.data(), n, y.data());
      t->gemm_nt_acc(dy.data(), rows, n, w.data(), k, dx.data());
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> y1(n, 0.0), dx1(k, 0.0);
        t->gemm_acc(x.data() + r * k, 1, k, w.data(), n, y1.data());
        t->gemm_nt_acc(dy.data() + r * n, 1, n, w.data(), k, dx1.data());
        EXPECT_TRUE(std::equal(y1.begin(), y1.end(), y.begin() + r * n)) << t->name;
        EXPECT_TRUE(std::equal(dx1.begin(), dx1.end(), dx.begin() + r * k)) << t->name;
      }
    }
  }
}

TEST(Kernels, BackendParsingAndSelection) {
  EXPECT_EQ(kernels::parse_backend("scalar"), kernels::Backend::kScalar);
  EXPECT_EQ(kernels::parse_backend("auto"), kernels::Backend::kAuto);
  EXPECT_THROW(kernels::parse_backend("sse9"), std::invalid_argument);
  EXPECT_TRUE(kernels::backend_supported(kernels::Backend::kScalar));
  const KernelTable& before = kernels::active();
  kernels::select_backend(kernels::Backend::kScalar);
  EXPECT_STREQ(kernels::active().name, "scalar");
  if (!kernels::backend_supported(kernels::Backend::kNeon)) {
    EXPECT_THROW(kernels::select_backend(kernels::Backend::kNeon), std::invalid_argument);
  }
  for (const KernelTable* t : all_tables()) {
    if (t == &before) kernels::select_backend(t == &kernels::scalar_table() ? kernels::Backend::kScalar
                                              : t == kernels::avx2_table()  ? kernels::Backend::kAvx2
                                                                            : kernels::Backend::kNeon);
  }
}
