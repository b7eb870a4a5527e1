#pragma once

// Markov-game interface: N agents, per-agent observations, actions, and
// rewards, with a done flag shared by all agents of one environment.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "macrpo/policy/distribution.hpp"
#include "macrpo/random.hpp"

namespace macrpo::envs {

using Observations = std::vector<std::vector<double>>;

struct StepResult {
  Observations observations;
  std::vector<double> rewards;
  bool done = false;
};

class MarkovGame {
 public:
  virtual ~MarkovGame() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_agents() const = 0;
  virtual std::size_t obs_width() const = 0;
  virtual ActionSpace action_space() const = 0;

  virtual Observations reset(Rng& rng) = 0;
  // Continuous actions are clamped to [-1, 1] inside the environment.
  virtual StepResult step(const std::vector<Action>& actions) = 0;

  virtual std::unique_ptr<MarkovGame> clone() const = 0;
};

// name is one of: coopnav, diagnostic, diagnostic-continuous.
std::unique_ptr<MarkovGame> make_env(const std::string& name, std::size_t num_agents);
bool is_known_env(const std::string& name);

}  // namespace macrpo::envs
