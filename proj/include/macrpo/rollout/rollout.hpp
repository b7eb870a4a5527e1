#pragma once

// On-policy data collection across E environments with N agents each, all
// acting through one shared actor.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "macrpo/envs/env.hpp"
#include "macrpo/nn/tensor.hpp"
#include "macrpo/policy/networks.hpp"
#include "macrpo/random.hpp"

namespace macrpo {

struct Transition {
  std::size_t agent_id = 0;
  std::size_t t = 0;  // 1-based time step within the rollout
  std::vector<double> obs;
  Action action;
  double reward = 0.0;
  bool done = false;
  double old_log_prob = 0.0;
  double old_value = 0.0;  // filled by value_pass
};

struct AgentTrajectory {
  std::size_t agent_id = 0;
  std::vector<Transition> transitions;
  // Actor state each step starts from (already zeroed at episode starts).
  std::vector<nn::LstmState> actor_states;
};

// Everything one environment produced during one rollout.
struct EnvRollout {
  std::vector<AgentTrajectory> agents;
  std::vector<std::uint8_t> done;         // per step, shared by all agents
  std::vector<std::uint8_t> reset_before; // per step: the step opens a new episode
  envs::Observations final_obs;           // observation after the last step
  std::vector<Action> prev_actions_at_start;  // empty entries at episode starts
  std::vector<Action> final_actions;          // previous action for the bootstrap entry

  std::size_t horizon() const { return done.size(); }
  std::size_t num_agents() const { return agents.size(); }
};

// Persistent per-environment state carried across rollouts.
struct EnvSlot {
  std::unique_ptr<envs::MarkovGame> env;
  Rng rng;
  envs::Observations obs;
  nn::LstmState actor_state;   // N rows
  std::vector<Action> prev_actions;
  bool episode_start = true;

  EnvSlot(std::unique_ptr<envs::MarkovGame> game, Rng generator, std::size_t actor_hidden);
};

// Creates E slots over clones of `prototype`; slot e draws from make_rng(seed, {e, ...}).
std::vector<EnvSlot> make_env_slots(const envs::MarkovGame& prototype, std::size_t count, std::uint64_t seed,
                                    std::size_t actor_hidden);

// Runs every slot for `horizon` steps with a frozen actor. threads <= 1 runs
// the environments sequentially; otherwise up to `threads` workers step
// disjoint environments. Results are identical either way. Throws EnvError
// naming the environment index if a step fails.
std::vector<EnvRollout> collect_rollout(std::span<EnvSlot> slots, const ActorNet& actor, std::size_t horizon,
                                        std::size_t threads = 1);

// One environment's rollout; exposed for tests.
EnvRollout rollout_env(EnvSlot& slot, const ActorNet& actor, std::size_t horizon);

}  // namespace macrpo
