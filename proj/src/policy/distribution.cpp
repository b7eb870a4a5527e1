#include "macrpo/policy/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "macrpo/errors.hpp"

namespace macrpo {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 ln(2 pi)

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double clamp_log_std(double raw) { return std::clamp(raw, kLogStdMin, kLogStdMax); }

ActionDistribution ActionDistribution::categorical(std::vector<double> logits) {
  if (logits.empty()) throw ContractError("categorical distribution needs at least one logit");
  ActionDistribution d;
  d.kind = ActionKind::kDiscrete;
  d.logits = std::move(logits);
  return d;
}

ActionDistribution ActionDistribution::gaussian(std::vector<double> mean, std::span<const double> raw_log_std) {
  if (mean.size() != raw_log_std.size()) throw ContractError("gaussian: mean/log_std size mismatch");
  ActionDistribution d;
  d.kind = ActionKind::kContinuous;
  d.mean = std::move(mean);
  d.log_std.resize(raw_log_std.size());
  std::transform(raw_log_std.begin(), raw_log_std.end(), d.log_std.begin(), clamp_log_std);
  return d;
}

std::vector<double> ActionDistribution::probabilities() const {
  if (kind != ActionKind::kDiscrete) throw ContractError("probabilities() on a continuous distribution");
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

SampledAction sample_action(const ActionDistribution& dist, Rng& rng) {
  SampledAction out;
  if (dist.kind == ActionKind::kDiscrete) {
    const std::vector<double> p = dist.probabilities();
    const double u = uniform01(rng);
    double cum = 0.0;
    int chosen = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cum += p[i];
      if (u < cum) {
        chosen = static_cast<int>(i);
        break;
      }
    }
    // Guard against rounding leaving u >= cum on a zero-probability tail entry.
    while (chosen > 0 && p[static_cast<std::size_t>(chosen)] == 0.0) --chosen;
    out.action.index = chosen;
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    out.action.values.resize(dist.mean.size());
    for (std::size_t d = 0; d < dist.mean.size(); ++d) {
      out.action.values[d] = dist.mean[d] + std::exp(dist.log_std[d]) * normal(rng);
    }
  }
  out.log_prob = log_prob_entropy(dist, out.action).log_prob;
  return out;
}

LogProbEntropy log_prob_entropy(const ActionDistribution& dist, const Action& action) {
  LogProbEntropy r;
  if (dist.kind == ActionKind::kDiscrete) {
    if (action.index < 0 || static_cast<std::size_t>(action.index) >= dist.logits.size()) {
      throw ContractError("discrete action index " + std::to_string(action.index) + " out of range");
    }
    const double lse = log_sum_exp(dist.logits);
    r.log_prob = dist.logits[static_cast<std::size_t>(action.index)] - lse;
    for (double z : dist.logits) {
      const double lp = z - lse;
      const double p = std::exp(lp);
      if (p > 0.0) r.entropy -= p * lp;
    }
  } else {
    if (action.values.size() != dist.mean.size()) throw ContractError("continuous action has wrong width");
    for (std::size_t d = 0; d < dist.mean.size(); ++d) {
      const double s = dist.log_std[d];
      const double z = (action.values[d] - dist.mean[d]) / std::exp(s);
      r.log_prob += -0.5 * z * z - s - kHalfLog2Pi;
      r.entropy += 0.5 + kHalfLog2Pi + s;
    }
  }
  return r;
}

LogProbEntropy categorical_terms(std::span<const double> logits, int action, std::span<double> dlogp,
                                 std::span<double> dentropy) {
  if (action < 0 || static_cast<std::size_t>(action) >= logits.size()) {
    throw ContractError("discrete action index " + std::to_string(action) + " out of range");
  }
  const double lse = log_sum_exp(logits);
  LogProbEntropy r;
  r.log_prob = logits[static_cast<std::size_t>(action)] - lse;
  for (double z : logits) {
    const double lp = z - lse;
    const double p = std::exp(lp);
    if (p > 0.0) r.entropy -= p * lp;
  }
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double lp = logits[k] - lse;
    const double p = std::exp(lp);
    dlogp[k] = (static_cast<int>(k) == action ? 1.0 : 0.0) - p;
    // dH/dz_k = -p_k (log p_k + H)
    dentropy[k] = p > 0.0 ? -p * (lp + r.entropy) : 0.0;
  }
  return r;
}

LogProbEntropy gaussian_terms(std::span<const double> mean, std::span<const double> raw_log_std,
                              std::span<const double> action, std::span<double> dlogp_dmean,
                              std::span<double> dlogp_dlogstd, std::span<double> dentropy_dlogstd) {
  LogProbEntropy r;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double raw = raw_log_std[d];
    const double s = clamp_log_std(raw);
    const bool inside = raw > kLogStdMin && raw < kLogStdMax;
    const double sigma = std::exp(s);
    const double z = (action[d] - mean[d]) / sigma;
    r.log_prob += -0.5 * z * z - s - kHalfLog2Pi;
    r.entropy += 0.5 + kHalfLog2Pi + s;
    dlogp_dmean[d] = z / sigma;
    dlogp_dlogstd[d] = inside ? z * z - 1.0 : 0.0;
    dentropy_dlogstd[d] = inside ? 1.0 : 0.0;
  }
  return r;
}

}  // namespace macrpo
