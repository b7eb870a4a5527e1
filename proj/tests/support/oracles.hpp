#pragma once

// Independent reference computations shared by unit tests and the acceptance
// binary: central finite differences, direct-summation estimators and
// synthetic rollouts.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "macrpo/advantage/advantage.hpp"
#include "macrpo/nn/tensor.hpp"
#include "macrpo/policy/distribution.hpp"
#include "macrpo/random.hpp"
#include "macrpo/rollout/rollout.hpp"

namespace macrpo::testing {

// |a - b| / max(|a|, |b|, floor)
double rel_err(double a, double b, double floor = 1e-6);

template <class F>
double central_diff(F&& f, double& x, double h = 1e-5) {
  const double saved = x;
  x = saved + h;
  const double fp = f();
  x = saved - h;
  const double fm = f();
  x = saved;
  return (fp - fm) / (2.0 * h);
}

nn::Tensor2 random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

// One randomized gradient-check trial per call. Each returns the largest
// relative error between analytic and central-difference gradients over every
// parameter and input entry it checks.
double grad_trial_linear(Rng& rng);
double grad_trial_tanh(Rng& rng);
double grad_trial_lstm_cell(Rng& rng);
double grad_trial_trunk(Rng& rng, bool recurrent);  // 3 steps, ragged rows, one reset
double grad_trial_categorical(Rng& rng);
double grad_trial_gaussian(Rng& rng);

struct ActorLossTrial {
  double max_rel_err = 0.0;
  bool skipped = false;      // some ratio sat within the kink margin of 1 +- eps
  std::size_t checked = 0;   // parameters compared
};
// Full clipped-surrogate actor loss on a frozen minibatch with perturbed
// actor parameters (so ratios differ from 1).
ActorLossTrial grad_trial_actor_loss(Rng& rng, double kink_margin = 1e-3);

// Direct summation forms of the estimators.
nn::Tensor2 direct_returns(const RewardMatrix& r, std::span<const double> terminal, double gamma, double beta);
nn::Tensor2 direct_deltas(const RewardMatrix& r, const ValueMatrix& v, double gamma, double beta);
nn::Tensor2 direct_gae(const nn::Tensor2& deltas, double gamma, double lambda, std::span<const std::uint8_t> done);

struct EstimatorInstance {
  RewardMatrix rewards;
  ValueMatrix values;
  double gamma = 0.99;
  double lambda = 0.95;
};
EstimatorInstance random_estimator_instance(Rng& rng, std::size_t T, std::size_t N);

// Largest absolute difference between recursive and direct forms for one
// random instance (returns, deltas, advantages).
double estimator_trial(Rng& rng, std::size_t T, std::size_t N, double beta);

// A rollout with random observations, actions, rewards and episode ends.
EnvRollout synthetic_rollout(Rng& rng, std::size_t N, std::size_t T, std::size_t obs_width, const ActionSpace& space,
                             std::size_t actor_hidden);

// Interleaving invariant, de-interleave round trip and bit-exact chunked critic
// evaluation for one random instance. Empty string on success.
std::string meta_structure_trial(Rng& rng, std::size_t max_agents, std::size_t max_horizon);

}  // namespace macrpo::testing
