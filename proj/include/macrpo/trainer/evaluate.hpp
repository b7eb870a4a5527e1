#pragma once

#include <cstddef>
#include <vector>

#include "macrpo/envs/env.hpp"
#include "macrpo/policy/networks.hpp"
#include "macrpo/random.hpp"

namespace macrpo {

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;             // population std over episodes
  std::vector<double> totals;   // per episode, summed over agents
};

// Runs `episodes` full episodes with the stochastic policy, each agent acting
// on its own observation and recurrent state. Episodes run in lockstep; each
// one draws its resets and actions from streams derived from one value of
// `rng`, so results do not depend on how many episodes run together.
EvalResult evaluate(const ActorNet& actor, const envs::MarkovGame& env, std::size_t episodes, Rng& rng);

// Guard against environments that never signal done.
inline constexpr std::size_t kMaxEvalSteps = 100000;

}  // namespace macrpo
