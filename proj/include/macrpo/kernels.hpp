#pragma once

// Dense arithmetic kernels behind the network layers and the optimizer.
//
// Every kernel exists as a scalar reference implementation plus SIMD variants
// (AVX2+FMA on x86-64, NEON on AArch64). One table is selected per process at
// first use, so a run never mixes backends. Within a backend every output
// element is produced by a fixed reduction order that does not depend on how
// many rows are in the batch; evaluating a row alone or inside a larger batch
// gives bit-identical results.
//
// Matrices are row-major. Shapes use the naming y[rows x n] += x[rows x k] * w[k x n].

#include <cstddef>
#include <string_view>

namespace macrpo::kernels {

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  const char* name;

  // y[rows x n] += x[rows x k] * w[k x n]
  void (*gemm_acc)(const double* x, std::size_t rows, std::size_t k,
                   const double* w, std::size_t n, double* y);
  // dx[rows x k] += dy[rows x n] * w^T, with w stored as [k x n]
  void (*gemm_nt_acc)(const double* dy, std::size_t rows, std::size_t n,
                      const double* w, std::size_t k, double* dx);
  // dw[k x n] += x^T * dy, with x [rows x k] and dy [rows x n]
  void (*gemm_tn_acc)(const double* x, std::size_t rows, std::size_t k,
                      const double* dy, std::size_t n, double* dw);
  double (*sum_squares)(const double* a, std::size_t n);
  void (*scale)(double* a, std::size_t n, double factor);
  // In-place Adam update; zeroes g afterwards.
  void (*adam_update)(double* w, double* g, double* m, double* v,
                      std::size_t n, const AdamCoeffs& c);
};

enum class Backend { kAuto, kScalar, kAvx2, kNeon };

const KernelTable& scalar_table();
// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool backend_supported(Backend b);

// The process-wide table. Resolved from MACRPO_KERNELS (auto|scalar|avx2|neon)
// on first call unless select_backend ran earlier.
const KernelTable& active();

// Throws std::invalid_argument if the backend is unavailable on this CPU.
void select_backend(Backend b);
Backend parse_backend(std::string_view name);

}  // namespace macrpo::kernels
