#pragma once

// Cooperative navigation with local rewards: N agents, N landmarks, agent i is
// assigned landmark i and is penalized by its distance to that landmark and by
// the number of other agents inside its collision radius.

#include <array>
#include <cstddef>
#include <vector>

#include "macrpo/envs/env.hpp"

namespace macrpo::envs {

struct CoopNavParams {
  double acceleration = 0.5;   // world units / step^2
  double damping = 0.5;        // velocity retained per step
  double dt = 0.1;
  double collision_radius = 0.15;
  std::size_t episode_length = 25;
};

using Vec2 = std::array<double, 2>;

struct CoopNavState {
  std::vector<Vec2> positions;
  std::vector<Vec2> velocities;
  std::vector<Vec2> landmarks;
  std::size_t step_count = 0;
};

enum CoopNavAction : int { kNoop = 0, kUp = 1, kDown = 2, kLeft = 3, kRight = 4 };

class CoopNav final : public MarkovGame {
 public:
  explicit CoopNav(std::size_t num_agents, CoopNavParams params = {});

  std::string name() const override { return "coopnav"; }
  std::size_t num_agents() const override { return n_; }
  // own position (2), own velocity (2), other agents relative (2(N-1)),
  // landmarks relative (2N) with the agent's own landmark first and the
  // remaining landmarks in index order.
  std::size_t obs_width() const override { return 4 + 2 * (n_ - 1) + 2 * n_; }
  ActionSpace action_space() const override { return {ActionKind::kDiscrete, 5}; }

  Observations reset(Rng& rng) override;
  StepResult step(const std::vector<Action>& actions) override;
  std::unique_ptr<MarkovGame> clone() const override { return std::make_unique<CoopNav>(*this); }

  const CoopNavState& state() const { return state_; }
  void set_state(CoopNavState s) { state_ = std::move(s); }
  const CoopNavParams& params() const { return params_; }

  Observations observe() const;
  std::vector<double> rewards() const;

 private:
  std::size_t n_;
  CoopNavParams params_;
  CoopNavState state_;
};

}  // namespace macrpo::envs
