#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "macrpo/envs/env.hpp"
#include "macrpo/nn/layers.hpp"
#include "macrpo/nn/optim.hpp"
#include "macrpo/policy/networks.hpp"
#include "macrpo/rollout/meta_trajectory.hpp"
#include "macrpo/trainer/trainer.hpp"

namespace macrpo::testing {

using nn::LstmState;
using nn::Tensor2;

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); }

double dot(const Tensor2& a, const Tensor2& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

template <class F>
double check_entries(std::vector<double>& params, const std::vector<double>& analytic, F&& loss) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    worst = std::max(worst, rel_err(analytic[k], central_diff(loss, params[k])));
  }
  return worst;
}

double weight(std::size_t i, std::size_t j, double beta) { return i == j ? 1.0 : beta; }

}  // namespace

double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

Tensor2 random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Tensor2 t(rows, cols);
  for (double& v : t.values) v = uniform(rng, -scale, scale);
  return t;
}

double grad_trial_linear(Rng& rng) {
  const std::size_t rows = pick(rng, 1, 5), in = pick(rng, 1, 6), out = pick(rng, 1, 6);
  nn::Linear lin("t", in, out);
  lin.init_uniform(rng);
  Tensor2 x = random_tensor(rng, rows, in);
  const Tensor2 g = random_tensor(rng, rows, out);
  auto loss = [&] {
    Tensor2 y;
    lin.forward(x, y);
    return dot(g, y);
  };
  Tensor2 dx(rows, in);
  lin.backward(x, g, &dx);
  double worst = check_entries(lin.weight.weights.values, lin.weight.grads.values, loss);
  worst = std::max(worst, check_entries(lin.bias.weights.values, lin.bias.grads.values, loss));
  return std::max(worst, check_entries(x.values, dx.values, loss));
}

double grad_trial_tanh(Rng& rng) {
  Tensor2 x = random_tensor(rng, pick(rng, 1, 4), pick(rng, 1, 6), 2.0);
  const Tensor2 g = random_tensor(rng, x.rows, x.cols);
  auto loss = [&] {
    Tensor2 y = x;
    nn::tanh_inplace(y);
    return dot(g, y);
  };
  Tensor2 y = x;
  nn::tanh_inplace(y);
  Tensor2 dx = g;
  nn::tanh_backward(y, dx);
  return check_entries(x.values, dx.values, loss);
}

double grad_trial_lstm_cell(Rng& rng) {
  const std::size_t rows = pick(rng, 1, 4), in = pick(rng, 1, 5), h = pick(rng, 1, 5);
  nn::LstmCell cell("t", in, h);
  cell.init_uniform(rng);
  for (double& b : cell.bias.weights.values) b += uniform(rng, -0.5, 0.5);
  Tensor2 x = random_tensor(rng, rows, in);
  LstmState prev(rows, h);
  prev.h = random_tensor(rng, rows, h, 0.8);
  prev.c = random_tensor(rng, rows, h, 1.5);
  const Tensor2 gh = random_tensor(rng, rows, h), gc = random_tensor(rng, rows, h);
  auto loss = [&] {
    LstmState next;
    cell.forward(x, prev, next, nullptr);
    return dot(gh, next.h) + dot(gc, next.c);
  };
  nn::LstmCell::Cache cache;
  LstmState next;
  cell.forward(x, prev, next, &cache);
  Tensor2 dx(rows, in), dh_prev, dc_prev;
  cell.backward(cache, gh, gc, &dx, dh_prev, dc_prev);
  double worst = 0.0;
  for (nn::ParamBlock* b : cell.blocks()) worst = std::max(worst, check_entries(b->weights.values, b->grads.values, loss));
  worst = std::max(worst, check_entries(x.values, dx.values, loss));
  worst = std::max(worst, check_entries(prev.h.values, dh_prev.values, loss));
  return std::max(worst, check_entries(prev.c.values, dc_prev.values, loss));
}

double grad_trial_trunk(Rng& rng, bool recurrent) {
  const std::size_t in = pick(rng, 1, 5), h = pick(rng, 1, 5);
  Trunk trunk("t", in, h, recurrent);
  trunk.init(rng);
  SequenceBatch batch;
  batch.push_step(random_tensor(rng, 3, in));
  batch.push_step(random_tensor(rng, 3, in), {1, 0, 0});
  batch.push_step(random_tensor(rng, 2, in));
  LstmState init(3, h);
  init.h = random_tensor(rng, 3, h, 0.5);
  init.c = random_tensor(rng, 3, h, 0.5);
  std::vector<Tensor2> g;
  for (std::size_t s = 0; s < batch.steps(); ++s) g.push_back(random_tensor(rng, batch.active[s], h));
  auto loss = [&] {
    const std::vector<Tensor2> f = trunk.forward(batch, init, nullptr);
    double total = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) total += dot(g[s], f[s]);
    return total;
  };
  Trunk::Trace trace;
  trunk.forward(batch, init, &trace);
  trunk.backward(trace, g);
  double worst = 0.0;
  for (nn::ParamBlock* b : trunk.blocks()) worst = std::max(worst, check_entries(b->weights.values, b->grads.values, loss));
  return worst;
}

double grad_trial_categorical(Rng& rng) {
  const std::size_t k = pick(rng, 2, 6);
  std::vector<double> logits(k);
  for (double& z : logits) z = uniform(rng, -2.0, 2.0);
  const int a = static_cast<int>(pick(rng, 0, k - 1));
  std::vector<double> dlogp(k), dent(k);
  categorical_terms(logits, a, dlogp, dent);
  auto logp = [&] { return log_prob_entropy(ActionDistribution::categorical(logits), Action{a, {}}).log_prob; };
  auto ent = [&] { return log_prob_entropy(ActionDistribution::categorical(logits), Action{a, {}}).entropy; };
  return std::max(check_entries(logits, dlogp, logp), check_entries(logits, dent, ent));
}

double grad_trial_gaussian(Rng& rng) {
  const std::size_t d = pick(rng, 1, 3);
  std::vector<double> mean(d), raw(d), act(d);
  for (std::size_t k = 0; k < d; ++k) {
    mean[k] = uniform(rng, -1.0, 1.0);
    raw[k] = uniform(rng, -1.5, 1.0);
    act[k] = mean[k] + uniform(rng, -1.5, 1.5);
  }
  std::vector<double> dmean(d), dls(d), dent(d);
  gaussian_terms(mean, raw, act, dmean, dls, dent);
  auto terms = [&] { return log_prob_entropy(ActionDistribution::gaussian(mean, raw), Action{-1, act}); };
  auto logp = [&] { return terms().log_prob; };
  auto ent = [&] { return terms().entropy; };
  double worst = check_entries(mean, dmean, logp);
  worst = std::max(worst, check_entries(raw, dls, logp));
  return std::max(worst, check_entries(raw, dent, ent));
}

ActorLossTrial grad_trial_actor_loss(Rng& rng, double kink_margin) {
  ActorLossTrial out;
  const bool continuous = rng() % 4 == 0;
  ExperimentConfig cfg;
  cfg.env = continuous ? "diagnostic-continuous" : "coopnav";
  cfg.num_agents = continuous ? 2 : pick(rng, 1, 3);
  constexpr Variant variants[] = {Variant::kFfNic, Variant::kFfIca, Variant::kLstmNic, Variant::kLstmIca,
                                  Variant::kLstmIcf};
  cfg.variant = variants[rng() % 5];
  cfg.num_envs = 2;
  cfg.horizon = pick(rng, 4, 8);
  cfg.seq_len = 3;
  cfg.actor_hidden = 4;
  cfg.critic_hidden = 4;
  cfg.beta = uniform01(rng);
  cfg.seed = rng();

  const auto game = envs::make_env(cfg.env, cfg.num_agents);
  Networks nets = make_networks(cfg, *game);
  std::vector<EnvSlot> slots = make_env_slots(*game, cfg.num_envs, cfg.seed, cfg.actor_hidden);
  std::vector<EnvRollout> rollouts = collect_rollout(slots, nets.actor, cfg.horizon);
  const IterationBatch batch = prepare_batch(cfg, nets, std::move(rollouts), rng);
  for (nn::ParamBlock* b : nets.actor_blocks()) {
    for (double& w : b->weights.values) w += uniform(rng, -0.15, 0.15);
  }

  std::vector<std::size_t> ids(batch.chunks.size());
  std::iota(ids.begin(), ids.end(), 0);
  const std::vector<nn::ParamBlock*> all = nets.all_blocks();
  auto loss = [&] {
    const MinibatchStats st = minibatch_gradients(cfg, nets, batch, ids);
    nn::zero_grads(all);
    return st.actor_loss;
  };

  nn::zero_grads(all);
  const MinibatchStats base = minibatch_gradients(cfg, nets, batch, ids);
  for (double r : base.ratios) {
    if (std::abs(r - (1.0 - cfg.clip)) < kink_margin || std::abs(r - (1.0 + cfg.clip)) < kink_margin) {
      out.skipped = true;
    }
  }
  if (out.skipped) {
    nn::zero_grads(all);
    return out;
  }
  std::vector<std::vector<double>> analytic;
  for (nn::ParamBlock* b : nets.actor_blocks()) analytic.push_back(b->grads.values);
  nn::zero_grads(all);
  std::size_t bi = 0;
  for (nn::ParamBlock* b : nets.actor_blocks()) {
    out.max_rel_err = std::max(out.max_rel_err, check_entries(b->weights.values, analytic[bi++], loss));
    out.checked += b->weights.size();
  }
  return out;
}

Tensor2 direct_returns(const RewardMatrix& r, std::span<const double> terminal, double gamma, double beta) {
  const std::size_t T = r.horizon(), N = r.agents();
  Tensor2 out(T, N);
  for (std::size_t i = 0; i < N; ++i) {
    double vbar = 0.0;
    for (std::size_t j = 0; j < N; ++j) vbar += weight(i, j, beta) * terminal[j];
    vbar /= static_cast<double>(N);
    for (std::size_t t = 0; t < T; ++t) {
      double total = 0.0;
      for (std::size_t k = t; k < T; ++k) {
        double alive = 1.0;
        for (std::size_t m = t; m < k; ++m) alive *= r.done[m] ? 0.0 : 1.0;
        double rbar = 0.0;
        for (std::size_t j = 0; j < N; ++j) rbar += weight(i, j, beta) * r.r(k, j);
        total += std::pow(gamma, static_cast<double>(k - t)) * alive * rbar / static_cast<double>(N);
      }
      double alive = 1.0;
      for (std::size_t m = t; m < T; ++m) alive *= r.done[m] ? 0.0 : 1.0;
      out(t, i) = total + std::pow(gamma, static_cast<double>(T - t)) * alive * vbar;
    }
  }
  return out;
}

Tensor2 direct_deltas(const RewardMatrix& r, const ValueMatrix& v, double gamma, double beta) {
  const std::size_t T = r.horizon(), N = r.agents();
  Tensor2 out(T, N);
  for (std::size_t t = 0; t < T; ++t) {
    const double keep = r.done[t] ? 0.0 : 1.0;
    for (std::size_t i = 0; i < N; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        s += weight(i, j, beta) * (r.r(t, j) + gamma * keep * v.v(t + 1, j) - v.v(t, j));
      }
      out(t, i) = s / static_cast<double>(N);
    }
  }
  return out;
}

Tensor2 direct_gae(const Tensor2& deltas, double gamma, double lambda, std::span<const std::uint8_t> done) {
  const std::size_t T = deltas.rows;
  Tensor2 out(T, deltas.cols);
  for (std::size_t i = 0; i < deltas.cols; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      double total = 0.0;
      for (std::size_t k = t; k < T; ++k) {
        double alive = 1.0;
        for (std::size_t m = t; m < k; ++m) alive *= done[m] ? 0.0 : 1.0;
        total += std::pow(gamma * lambda, static_cast<double>(k - t)) * alive * deltas(k, i);
      }
      out(t, i) = total;
    }
  }
  return out;
}

EstimatorInstance random_estimator_instance(Rng& rng, std::size_t T, std::size_t N) {
  EstimatorInstance in;
  in.rewards.r = random_tensor(rng, T, N);
  in.rewards.done.resize(T);
  for (auto& d : in.rewards.done) d = uniform01(rng) < 0.2 ? 1 : 0;
  in.values.v = random_tensor(rng, T + 1, N, 2.0);
  in.gamma = uniform(rng, 0.5, 1.0);
  in.lambda = uniform01(rng);
  return in;
}

double estimator_trial(Rng& rng, std::size_t T, std::size_t N, double beta) {
  const EstimatorInstance in = random_estimator_instance(rng, T, N);
  const Tensor2 ret = discounted_returns(in.rewards, in.values.v.row(T), in.gamma, beta);
  const Tensor2 ret_ref = direct_returns(in.rewards, in.values.v.row(T), in.gamma, beta);
  const Tensor2 del = multi_agent_deltas(in.rewards, in.values, in.gamma, beta);
  const Tensor2 del_ref = direct_deltas(in.rewards, in.values, in.gamma, beta);
  const Tensor2 adv = gae(del, in.gamma, in.lambda, in.rewards.done);
  const Tensor2 adv_ref = direct_gae(del_ref, in.gamma, in.lambda, in.rewards.done);
  double worst = 0.0;
  for (std::size_t k = 0; k < ret.size(); ++k) {
    worst = std::max({worst, std::abs(ret.values[k] - ret_ref.values[k]), std::abs(del.values[k] - del_ref.values[k]),
                      std::abs(adv.values[k] - adv_ref.values[k])});
  }
  return worst;
}

EnvRollout synthetic_rollout(Rng& rng, std::size_t N, std::size_t T, std::size_t obs_width, const ActionSpace& space,
                             std::size_t actor_hidden) {
  auto random_action = [&] {
    Action a;
    if (space.kind == ActionKind::kDiscrete) {
      a.index = static_cast<int>(rng() % space.size);
    } else {
      a.values.resize(space.size);
      for (double& v : a.values) v = uniform(rng, -1.0, 1.0);
    }
    return a;
  };
  auto random_obs = [&] {
    std::vector<double> o(obs_width);
    for (double& v : o) v = uniform(rng, -1.0, 1.0);
    return o;
  };
  EnvRollout ro;
  ro.agents.resize(N);
  for (std::size_t t = 0; t < T; ++t) {
    ro.reset_before.push_back(t == 0 ? static_cast<std::uint8_t>(rng() % 2) : ro.done[t - 1]);
    ro.done.push_back(uniform01(rng) < 0.15 ? 1 : 0);
  }
  for (std::size_t i = 0; i < N; ++i) {
    AgentTrajectory& a = ro.agents[i];
    a.agent_id = i;
    for (std::size_t t = 0; t < T; ++t) {
      Transition tr;
      tr.agent_id = i;
      tr.t = t + 1;
      tr.obs = random_obs();
      tr.action = random_action();
      tr.reward = uniform(rng, -1.0, 1.0);
      tr.done = ro.done[t] != 0;
      tr.old_log_prob = uniform(rng, -2.0, 0.0);
      a.transitions.push_back(std::move(tr));
      LstmState s(1, actor_hidden);
      if (!ro.reset_before[t]) {
        s.h = random_tensor(rng, 1, actor_hidden, 0.5);
        s.c = random_tensor(rng, 1, actor_hidden, 0.5);
      }
      a.actor_states.push_back(std::move(s));
    }
    ro.prev_actions_at_start.push_back(ro.reset_before[0] ? Action{} : random_action());
    ro.final_obs.push_back(random_obs());
    ro.final_actions.push_back(ro.done[T - 1] ? Action{} : a.transitions.back().action);
  }
  return ro;
}

std::string meta_structure_trial(Rng& rng, std::size_t max_agents, std::size_t max_horizon) {
  const std::size_t N = pick(rng, 1, max_agents), T = pick(rng, 1, max_horizon);
  const std::size_t obs_w = pick(rng, 1, 4), hidden = pick(rng, 2, 5);
  const CriticInputSpec spec{obs_w, ActionSpace{ActionKind::kDiscrete, 3}, rng() % 2 == 0};
  const EnvRollout ro = synthetic_rollout(rng, N, T, obs_w, spec.action_space, 3);
  const MetaTrajectory meta = build_meta_trajectory(ro, spec, hidden, rng);

  if (meta.entries.size() != N * T) return "meta length is not N * T";
  if (meta.order_map.size() != T + 1) return "order map does not cover every time step";
  for (std::size_t t = 0; t <= T; ++t) {
    std::vector<std::size_t> sorted = meta.order_map[t];
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < N; ++k) {
      if (sorted[k] != k) return "order map entry is not a permutation";
      if (N <= 2 && meta.order_map[t][k] != k) return "order must be fixed for N <= 2";
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t p = 0; p < N; ++p) {
      const MetaEntry& e = meta.entries[t * N + p];
      const std::size_t i = meta.order_map[t][p];
      if (e.agent != i || e.t != t) return "interleaving invariant violated";
      const auto& obs = ro.agents[i].transitions[t].obs;
      if (!std::equal(obs.begin(), obs.end(), e.input.begin())) return "entry input is not the agent's observation";
    }
  }
  const auto per_agent = deinterleave(meta);
  for (std::size_t i = 0; i < N; ++i) {
    if (per_agent[i].size() != T) return "de-interleaved stream has wrong length";
    for (std::size_t t = 0; t < T; ++t) {
      if (per_agent[i][t].agent != i || per_agent[i][t].t != t) return "de-interleave lost ordering";
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t p = 0; p < N; ++p) {
      const MetaEntry& a = per_agent[meta.order_map[t][p]][t];
      const MetaEntry& b = meta.entries[t * N + p];
      if (a.input != b.input || a.reset != b.reset) return "re-interleave does not reproduce the meta-trajectory";
    }
  }

  CriticNet critic(spec.width(), hidden, true);
  critic.init(rng);
  const std::size_t L = pick(rng, 1, 4);
  for (CriticMode mode : {CriticMode::kMeta, CriticMode::kPerAgent}) {
    const ValuePassResult full = value_pass(meta, critic, mode);
    const std::vector<Chunk> chunks = chunk_for_training(meta, full, ro, L, mode);
    std::size_t covered = 0;
    for (const Chunk& c : chunks) {
      const std::span<const MetaEntry> entries = chunk_entries(meta, c.range);
      if (entries.data() != meta.entries.data() + covered) return "chunks are not contiguous";
      covered += entries.size();
      if (mode == CriticMode::kMeta) {
        std::vector<std::vector<double>> inputs;
        std::vector<std::uint8_t> reset;
        for (const MetaEntry& e : entries) {
          inputs.push_back(e.input);
          reset.push_back(reset.empty() ? 0 : e.reset);
        }
        const CriticSequenceResult r = critic_forward_meta(inputs, c.critic_meta_state, critic, reset);
        for (std::size_t k = 0; k < entries.size(); ++k) {
          if (r.values[k] != full.values.v(entries[k].t, entries[k].agent)) return "chunked meta evaluation differs";
        }
      } else {
        for (std::size_t i = 0; i < N; ++i) {
          std::vector<std::vector<double>> inputs;
          std::vector<std::uint8_t> reset;
          for (std::size_t t = c.range.t0; t < c.range.t0 + c.range.len; ++t) {
            inputs.push_back(per_agent[i][t].input);
            reset.push_back(t == c.range.t0 ? 0 : ro.reset_before[t]);
          }
          const CriticSequenceResult r = critic_forward_meta(inputs, c.critic_agent_states[i], critic, reset);
          for (std::size_t k = 0; k < inputs.size(); ++k) {
            if (r.values[k] != full.values.v(c.range.t0 + k, i)) return "chunked per-agent evaluation differs";
          }
        }
      }
    }
    if (covered != meta.entries.size()) return "chunks do not cover the meta-trajectory";
  }
  return {};
}

}  // namespace macrpo::testing
