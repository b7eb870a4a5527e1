#include "macrpo/rollout/rollout.hpp"

#include <exception>
#include <string>
#include <thread>

#include "macrpo/errors.hpp"

namespace macrpo {

using nn::LstmState;
using nn::Tensor2;

EnvSlot::EnvSlot(std::unique_ptr<envs::MarkovGame> game, Rng generator, std::size_t actor_hidden)
    : env(std::move(game)), rng(std::move(generator)) {
  const std::size_t n = env->num_agents();
  actor_state = LstmState(n, actor_hidden);
  prev_actions.assign(n, Action{});
  obs = env->reset(rng);
  episode_start = true;
}

std::vector<EnvSlot> make_env_slots(const envs::MarkovGame& prototype, std::size_t count, std::uint64_t seed,
                                    std::size_t actor_hidden) {
  std::vector<EnvSlot> slots;
  slots.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    slots.emplace_back(prototype.clone(), make_rng(seed, {0x656e76ULL, e}), actor_hidden);
  }
  return slots;
}

EnvRollout rollout_env(EnvSlot& slot, const ActorNet& actor, std::size_t horizon) {
  const std::size_t n = slot.env->num_agents();
  const std::size_t obs_w = slot.env->obs_width();
  EnvRollout out;
  out.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.agents[i].agent_id = i;
    out.agents[i].transitions.reserve(horizon);
    out.agents[i].actor_states.reserve(horizon);
  }
  out.done.reserve(horizon);
  out.reset_before.reserve(horizon);
  if (slot.episode_start) slot.prev_actions.assign(n, Action{});
  out.prev_actions_at_start = slot.prev_actions;

  for (std::size_t t = 0; t < horizon; ++t) {
    if (slot.episode_start) {
      slot.actor_state = LstmState(n, actor.hidden());
      slot.prev_actions.assign(n, Action{});
    }
    out.reset_before.push_back(slot.episode_start ? 1 : 0);

    Tensor2 x(n, obs_w);
    for (std::size_t i = 0; i < n; ++i) {
      if (slot.obs[i].size() != obs_w) throw EnvError("observation width mismatch");
      std::copy(slot.obs[i].begin(), slot.obs[i].end(), x.row(i).begin());
      out.agents[i].actor_states.push_back(slot.actor_state.slice(i));
    }
    LstmState next;
    const Tensor2 head = actor.step(x, slot.actor_state, next);

    std::vector<Action> actions(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SampledAction s = sample_action(actor.distribution(head.row(i)), slot.rng);
      actions[i] = s.action;
      Transition tr;
      tr.agent_id = i;
      tr.t = t + 1;
      tr.obs = slot.obs[i];
      tr.action = s.action;
      tr.old_log_prob = s.log_prob;
      out.agents[i].transitions.push_back(std::move(tr));
    }

    envs::StepResult result = slot.env->step(actions);
    if (result.rewards.size() != n || result.observations.size() != n) {
      throw EnvError("environment returned wrong number of agents");
    }
    for (std::size_t i = 0; i < n; ++i) {
      Transition& tr = out.agents[i].transitions.back();
      tr.reward = result.rewards[i];
      tr.done = result.done;
      if (!std::isfinite(tr.reward)) throw EnvError("non-finite reward");
    }
    out.done.push_back(result.done ? 1 : 0);

    slot.actor_state = std::move(next);
    slot.prev_actions = actions;
    if (result.done) {
      slot.obs = slot.env->reset(slot.rng);
      slot.episode_start = true;
    } else {
      slot.obs = std::move(result.observations);
      slot.episode_start = false;
    }
  }
  out.final_obs = slot.obs;
  out.final_actions = slot.episode_start ? std::vector<Action>(n) : slot.prev_actions;
  return out;
}

std::vector<EnvRollout> collect_rollout(std::span<EnvSlot> slots, const ActorNet& actor, std::size_t horizon,
                                        std::size_t threads) {
  std::vector<EnvRollout> out(slots.size());
  std::vector<std::exception_ptr> errors(slots.size());
  auto run_one = [&](std::size_t e) {
    try {
      out[e] = rollout_env(slots[e], actor, horizon);
    } catch (...) {
      errors[e] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(threads, slots.size());
  if (workers <= 1) {
    for (std::size_t e = 0; e < slots.size(); ++e) run_one(e);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t e = w; e < slots.size(); e += workers) run_one(e);
      });
    }
  }

  for (std::size_t e = 0; e < slots.size(); ++e) {
    if (!errors[e]) continue;
    try {
      std::rethrow_exception(errors[e]);
    } catch (const std::exception& ex) {
      throw EnvError("environment " + std::to_string(e) + " failed during rollout: " + ex.what());
    }
  }
  return out;
}

}  // namespace macrpo
