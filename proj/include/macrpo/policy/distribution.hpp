#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "macrpo/random.hpp"

namespace macrpo {

enum class ActionKind { kDiscrete, kContinuous };

struct ActionSpace {
  ActionKind kind = ActionKind::kDiscrete;
  // Number of discrete choices, or dimensionality of a continuous action.
  std::size_t size = 1;

  // Width of the policy head output (logits or Gaussian mean).
  std::size_t head_width() const { return size; }
  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;
};

struct Action {
  int index = -1;               // discrete
  std::vector<double> values;   // continuous, pre-clamp sample

  friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct ActionDistribution {
  ActionKind kind = ActionKind::kDiscrete;
  std::vector<double> logits;
  std::vector<double> mean;
  std::vector<double> log_std;  // already clamped to [kLogStdMin, kLogStdMax]

  static ActionDistribution categorical(std::vector<double> logits);
  static ActionDistribution gaussian(std::vector<double> mean, std::span<const double> raw_log_std);

  std::vector<double> probabilities() const;  // discrete only
};

struct SampledAction {
  Action action;
  double log_prob = 0.0;
};

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

SampledAction sample_action(const ActionDistribution& dist, Rng& rng);
LogProbEntropy log_prob_entropy(const ActionDistribution& dist, const Action& action);

// Same quantities plus gradients w.r.t. the logits (discrete).
LogProbEntropy categorical_terms(std::span<const double> logits, int action, std::span<double> dlogp,
                                 std::span<double> dentropy);

// Gaussian terms for one sample. raw_log_std is the unclamped parameter;
// gradients w.r.t. it vanish outside the clamp bounds.
LogProbEntropy gaussian_terms(std::span<const double> mean, std::span<const double> raw_log_std,
                              std::span<const double> action, std::span<double> dlogp_dmean,
                              std::span<double> dlogp_dlogstd, std::span<double> dentropy_dlogstd);

double clamp_log_std(double raw);

}  // namespace macrpo
