#include "macrpo/rollout/meta_trajectory.hpp"

#include <algorithm>
#include <numeric>

#include "macrpo/errors.hpp"

namespace macrpo {

using nn::LstmState;
using nn::Tensor2;

std::vector<double> critic_input(std::span<const double> obs, const Action& prev_action, const CriticInputSpec& spec) {
  if (obs.size() != spec.obs_width) throw ConfigError("critic_input: observation width mismatch");
  std::vector<double> out(obs.begin(), obs.end());
  if (!spec.include_prev_action) return out;
  out.resize(spec.width(), 0.0);
  double* tail = out.data() + spec.obs_width;
  if (spec.action_space.kind == ActionKind::kDiscrete) {
    if (prev_action.index >= 0) {
      if (static_cast<std::size_t>(prev_action.index) >= spec.action_space.size) {
        throw ContractError("critic_input: previous action out of range");
      }
      tail[prev_action.index] = 1.0;
    }
  } else if (!prev_action.values.empty()) {
    if (prev_action.values.size() != spec.action_space.size) throw ContractError("critic_input: action size mismatch");
    std::copy(prev_action.values.begin(), prev_action.values.end(), tail);
  }
  return out;
}

MetaTrajectory build_meta_trajectory(const EnvRollout& rollout, const CriticInputSpec& spec, std::size_t critic_hidden,
                                     Rng& rng) {
  const std::size_t n = rollout.num_agents();
  const std::size_t T = rollout.horizon();
  if (n == 0 || T == 0) throw ContractError("build_meta_trajectory: empty rollout");
  for (const AgentTrajectory& a : rollout.agents) {
    if (a.transitions.size() != T) throw ContractError("build_meta_trajectory: ragged agent trajectories");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (n > 2) std::shuffle(order.begin(), order.end(), rng);

  MetaTrajectory meta;
  meta.num_agents = n;
  meta.horizon = T;
  meta.order_map.assign(T + 1, order);
  meta.initial_state = LstmState(1, critic_hidden);
  meta.entries.reserve(n * T);

  const Action none;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t i = order[p];
      const Action* prev = &none;
      if (rollout.reset_before[t] == 0) {
        prev = t == 0 ? &rollout.prev_actions_at_start[i] : &rollout.agents[i].transitions[t - 1].action;
      }
      MetaEntry e;
      e.agent = i;
      e.t = t;
      e.input = critic_input(rollout.agents[i].transitions[t].obs, *prev, spec);
      e.reset = p == 0 ? rollout.reset_before[t] : 0;
      meta.entries.push_back(std::move(e));
    }
  }
  meta.bootstrap.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = order[p];
    MetaEntry e;
    e.agent = i;
    e.t = T;
    e.input = critic_input(rollout.final_obs[i], rollout.final_actions[i], spec);
    e.reset = p == 0 ? rollout.done[T - 1] : 0;
    meta.bootstrap.push_back(std::move(e));
  }
  return meta;
}

std::vector<std::vector<MetaEntry>> deinterleave(const MetaTrajectory& meta) {
  std::vector<std::vector<MetaEntry>> out(meta.num_agents);
  for (auto& v : out) v.reserve(meta.horizon);
  for (const MetaEntry& e : meta.entries) out[e.agent].push_back(e);
  return out;
}

ValuePassResult value_pass(const MetaTrajectory& meta, const CriticNet& critic, CriticMode mode, EnvRollout* rollout) {
  const std::size_t n = meta.num_agents;
  const std::size_t T = meta.horizon;
  ValuePassResult out;
  out.values.v = Tensor2(T + 1, n);

  if (mode == CriticMode::kMeta) {
    std::vector<std::vector<double>> inputs;
    std::vector<std::uint8_t> reset;
    inputs.reserve(n * (T + 1));
    reset.reserve(n * (T + 1));
    for (const MetaEntry& e : meta.entries) {
      inputs.push_back(e.input);
      reset.push_back(e.reset);
    }
    for (const MetaEntry& e : meta.bootstrap) {
      inputs.push_back(e.input);
      reset.push_back(e.reset);
    }
    CriticSequenceResult r = critic_forward_meta(inputs, meta.initial_state, critic, reset);
    for (std::size_t k = 0; k < n * T; ++k) out.values.v(meta.entries[k].t, meta.entries[k].agent) = r.values[k];
    for (std::size_t p = 0; p < n; ++p) out.values.v(T, meta.bootstrap[p].agent) = r.values[n * T + p];
    out.meta_states.reserve(T + 1);
    for (std::size_t t = 0; t <= T; ++t) out.meta_states.push_back(std::move(r.states[t * n]));
  } else {
    const std::vector<std::vector<MetaEntry>> per_agent = deinterleave(meta);
    std::vector<const MetaEntry*> boot(n);
    for (const MetaEntry& e : meta.bootstrap) boot[e.agent] = &e;
    SequenceBatch batch;
    for (std::size_t t = 0; t <= T; ++t) {
      Tensor2 x(n, critic.input_width());
      std::vector<std::uint8_t> reset(n);
      for (std::size_t i = 0; i < n; ++i) {
        const MetaEntry& e = t < T ? per_agent[i][t] : *boot[i];
        if (e.input.size() != x.cols) throw ConfigError("value_pass: critic input width mismatch");
        std::copy(e.input.begin(), e.input.end(), x.row(i).begin());
        // Resets are only flagged on the first entry of a group in meta order.
        reset[i] = meta.entries.empty() ? 0 : (t < T ? meta.entries[t * n].reset : meta.bootstrap[0].reset);
      }
      batch.push_step(std::move(x), std::move(reset));
    }
    std::vector<LstmState> before;
    const std::vector<Tensor2> features =
        critic.trunk.forward(batch, LstmState(n, critic.hidden()), nullptr, &before, nullptr);
    for (std::size_t t = 0; t <= T; ++t) {
      Tensor2 v;
      critic.head.forward(features[t], v);
      for (std::size_t i = 0; i < n; ++i) out.values.v(t, i) = v(i, 0);
    }
    out.agent_states.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      out.agent_states[i].reserve(T + 1);
      for (std::size_t t = 0; t <= T; ++t) out.agent_states[i].push_back(before[t].slice(i));
    }
  }

  if (!out.values.v.all_finite()) throw NumericError("value_pass: non-finite critic output");
  if (rollout != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < T; ++t) rollout->agents[i].transitions[t].old_value = out.values.v(t, i);
    }
  }
  return out;
}

std::vector<ChunkRange> chunk_ranges(std::size_t horizon, std::size_t seq_len) {
  if (seq_len == 0) throw ContractError("chunk_ranges: sequence length must be positive");
  std::vector<ChunkRange> out;
  for (std::size_t t0 = 0; t0 < horizon; t0 += seq_len) out.push_back({t0, std::min(seq_len, horizon - t0)});
  return out;
}

std::vector<Chunk> chunk_for_training(const MetaTrajectory& meta, const ValuePassResult& values,
                                      const EnvRollout& rollout, std::size_t seq_len, CriticMode mode,
                                      std::size_t env_index) {
  std::vector<Chunk> out;
  for (const ChunkRange& r : chunk_ranges(meta.horizon, seq_len)) {
    Chunk c;
    c.env = env_index;
    c.range = r;
    if (mode == CriticMode::kMeta) {
      c.critic_meta_state = values.meta_states.at(r.t0);
    } else {
      for (std::size_t i = 0; i < meta.num_agents; ++i) c.critic_agent_states.push_back(values.agent_states.at(i).at(r.t0));
    }
    for (std::size_t i = 0; i < meta.num_agents; ++i) c.actor_states.push_back(rollout.agents[i].actor_states.at(r.t0));
    out.push_back(std::move(c));
  }
  return out;
}

std::span<const MetaEntry> chunk_entries(const MetaTrajectory& meta, const ChunkRange& range) {
  const std::size_t begin = range.t0 * meta.num_agents;
  const std::size_t count = range.len * meta.num_agents;
  if (begin + count > meta.entries.size()) throw ContractError("chunk_entries: range outside the trajectory");
  return std::span<const MetaEntry>(meta.entries).subspan(begin, count);
}

}  // namespace macrpo
