#include "macrpo/envs/coopnav.hpp"

#include <cmath>
#include <string>

#include "macrpo/errors.hpp"

namespace macrpo::envs {

CoopNav::CoopNav(std::size_t num_agents, CoopNavParams params) : n_(num_agents), params_(params) {
  if (n_ == 0) throw ConfigError("coopnav: need at least one agent");
  state_.positions.assign(n_, Vec2{0.0, 0.0});
  state_.velocities.assign(n_, Vec2{0.0, 0.0});
  state_.landmarks.assign(n_, Vec2{0.0, 0.0});
}

Observations CoopNav::reset(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n_; ++i) {
    state_.positions[i] = {u(rng), u(rng)};
    state_.velocities[i] = {0.0, 0.0};
  }
  for (std::size_t i = 0; i < n_; ++i) state_.landmarks[i] = {u(rng), u(rng)};
  state_.step_count = 0;
  return observe();
}

Observations CoopNav::observe() const {
  Observations obs(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::vector<double>& o = obs[i];
    o.reserve(obs_width());
    const Vec2& p = state_.positions[i];
    o.push_back(p[0]);
    o.push_back(p[1]);
    o.push_back(state_.velocities[i][0]);
    o.push_back(state_.velocities[i][1]);
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      o.push_back(state_.positions[j][0] - p[0]);
      o.push_back(state_.positions[j][1] - p[1]);
    }
    o.push_back(state_.landmarks[i][0] - p[0]);
    o.push_back(state_.landmarks[i][1] - p[1]);
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      o.push_back(state_.landmarks[j][0] - p[0]);
      o.push_back(state_.landmarks[j][1] - p[1]);
    }
  }
  return obs;
}

std::vector<double> CoopNav::rewards() const {
  std::vector<double> r(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const Vec2& p = state_.positions[i];
    const Vec2& l = state_.landmarks[i];
    double reward = -std::hypot(p[0] - l[0], p[1] - l[1]);
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const Vec2& q = state_.positions[j];
      if (std::hypot(p[0] - q[0], p[1] - q[1]) < params_.collision_radius) reward -= 1.0;
    }
    r[i] = reward;
  }
  return r;
}

StepResult CoopNav::step(const std::vector<Action>& actions) {
  if (actions.size() != n_) throw ContractError("coopnav: expected one action per agent");
  for (std::size_t i = 0; i < n_; ++i) {
    const int a = actions[i].index;
    if (a < kNoop || a > kRight) throw ContractError("coopnav: invalid action index " + std::to_string(a));
  }
  const double acc = params_.acceleration;
  for (std::size_t i = 0; i < n_; ++i) {
    Vec2 a{0.0, 0.0};
    switch (actions[i].index) {
      case kUp: a[1] = acc; break;
      case kDown: a[1] = -acc; break;
      case kLeft: a[0] = -acc; break;
      case kRight: a[0] = acc; break;
      default: break;
    }
    Vec2& v = state_.velocities[i];
    Vec2& p = state_.positions[i];
    for (int d = 0; d < 2; ++d) {
      v[d] = params_.damping * v[d] + a[d] * params_.dt;
      p[d] = p[d] + v[d] * params_.dt;
    }
  }
  ++state_.step_count;
  StepResult out;
  out.rewards = rewards();
  out.observations = observe();
  out.done = state_.step_count >= params_.episode_length;
  return out;
}

}  // namespace macrpo::envs
