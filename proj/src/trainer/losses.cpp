#include "macrpo/trainer/losses.hpp"

#include <algorithm>
#include <cmath>

#include "macrpo/errors.hpp"

namespace macrpo {

double prob_ratio(double new_log_prob, double old_log_prob) {
  if (!std::isfinite(new_log_prob) || !std::isfinite(old_log_prob)) {
    throw NumericError("prob_ratio: non-finite log-probability");
  }
  return std::exp(std::clamp(new_log_prob - old_log_prob, -kRatioExponentLimit, kRatioExponentLimit));
}

double prob_ratio_grad(double new_log_prob, double old_log_prob) {
  const double d = new_log_prob - old_log_prob;
  if (d < -kRatioExponentLimit || d > kRatioExponentLimit) return 0.0;
  return std::exp(d);
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped_ratio = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  const double unclipped = ratio * advantage;
  const double clipped = clipped_ratio * advantage;
  SurrogateTerm s;
  s.clipped = std::abs(ratio - 1.0) > eps;
  if (unclipped <= clipped) {
    s.value = unclipped;
    s.dvalue_dratio = advantage;
  } else {
    s.value = clipped;
    s.dvalue_dratio = clipped_ratio == ratio ? advantage : 0.0;
  }
  return s;
}

double actor_loss(std::span<const double> ratios, std::span<const double> advantages,
                  std::span<const double> entropies, double eps, double entropy_coef) {
  if (ratios.size() != advantages.size() || ratios.size() != entropies.size()) {
    throw ContractError("actor_loss: misaligned inputs");
  }
  if (ratios.empty()) return 0.0;
  double surr = 0.0, ent = 0.0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    surr += clipped_surrogate(ratios[k], advantages[k], eps).value;
    ent += entropies[k];
  }
  const double n = static_cast<double>(ratios.size());
  return -(surr / n) - entropy_coef * (ent / n);
}

double critic_loss(std::span<const double> values, std::span<const double> targets) {
  if (values.size() != targets.size()) throw ContractError("critic_loss: misaligned inputs");
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double d = values[k] - targets[k];
    sum += d * d;
  }
  return sum / static_cast<double>(values.size());
}

}  // namespace macrpo
