#pragma once

#include <span>

namespace macrpo {

inline constexpr double kRatioExponentLimit = 20.0;

// exp(new - old) with the exponent clamped to +-kRatioExponentLimit.
double prob_ratio(double new_log_prob, double old_log_prob);

// d prob_ratio / d new_log_prob (zero where the exponent is clamped).
double prob_ratio_grad(double new_log_prob, double old_log_prob);

struct SurrogateTerm {
  double value = 0.0;         // min(f A, clip(f, 1 - eps, 1 + eps) A)
  double dvalue_dratio = 0.0;
  bool clipped = false;       // |f - 1| > eps
};

SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps);

// -mean(surrogate) - c * mean(entropy).
double actor_loss(std::span<const double> ratios, std::span<const double> advantages,
                  std::span<const double> entropies, double eps, double entropy_coef);

// Mean squared error.
double critic_loss(std::span<const double> values, std::span<const double> targets);

}  // namespace macrpo
