#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "macrpo/kernels.hpp"

namespace macrpo::kernels {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return &scalar_table();
    case Backend::kAvx2:
      return cpu_has_avx2() ? avx2_table() : nullptr;
    case Backend::kNeon:
      return neon_table();
    case Backend::kAuto:
      if (const KernelTable* t = table_for(Backend::kAvx2)) return t;
      if (const KernelTable* t = neon_table()) return t;
      return &scalar_table();
  }
  return nullptr;
}

const KernelTable* resolve_from_env() {
  Backend b = Backend::kAuto;
  if (const char* env = std::getenv("MACRPO_KERNELS"); env != nullptr && *env != '\0') {
    b = parse_backend(env);
  }
  const KernelTable* t = table_for(b);
  if (t == nullptr) throw std::invalid_argument("MACRPO_KERNELS backend not available on this CPU");
  return t;
}

}  // namespace

bool backend_supported(Backend b) { return table_for(b) != nullptr; }

Backend parse_backend(std::string_view name) {
  if (name == "auto") return Backend::kAuto;
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  throw std::invalid_argument("unknown kernel backend: " + std::string(name));
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const KernelTable* resolved = resolve_from_env();
    g_active.compare_exchange_strong(t, resolved, std::memory_order_acq_rel);
    t = g_active.load(std::memory_order_acquire);
  }
  return *t;
}

void select_backend(Backend b) {
  const KernelTable* t = table_for(b);
  if (t == nullptr) throw std::invalid_argument("kernel backend not available on this CPU");
  g_active.store(t, std::memory_order_release);
}

}  // namespace macrpo::kernels
