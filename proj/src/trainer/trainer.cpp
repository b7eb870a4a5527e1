#include "macrpo/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "macrpo/errors.hpp"
#include "macrpo/nn/checkpoint.hpp"
#include "macrpo/trainer/losses.hpp"

namespace macrpo {

using nn::LstmState;
using nn::Tensor2;

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;

std::size_t worker_count(const ExperimentConfig& cfg, std::size_t envs) {
  return cfg.rollout_threads == 0 ? envs : cfg.rollout_threads;
}

std::string describe_minibatch(const IterationBatch& batch, std::span<const std::size_t> ids) {
  std::ostringstream os;
  os << "minibatch chunks (env, t0, len):";
  for (std::size_t id : ids) {
    const Chunk& c = batch.chunks[id];
    os << " (" << c.env << ", " << c.range.t0 << ", " << c.range.len << ")";
  }
  return os.str();
}

// Sequence rows for one network pass, sorted so that running rows form a prefix.
struct SeqRow {
  const Chunk* chunk = nullptr;
  std::size_t agent = 0;  // unused for meta-critic rows
  std::size_t len = 0;    // steps
};

void sort_rows(std::vector<SeqRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SeqRow& a, const SeqRow& b) { return a.len > b.len; });
}

std::size_t active_at(const std::vector<SeqRow>& rows, std::size_t s) {
  std::size_t n = 0;
  while (n < rows.size() && rows[n].len > s) ++n;
  return n;
}

const MetaEntry& entry_for(const MetaTrajectory& meta, std::size_t t, std::size_t agent) {
  const auto& order = meta.order_map[t];
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (order[p] == agent) return meta.entries[meta.index(t, p)];
  }
  throw ContractError("entry_for: agent missing from order map");
}

struct ActorPass {
  double loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_deviation = 0.0;
  std::size_t samples = 0;
  std::vector<double> ratios;
};

ActorPass actor_pass(const ExperimentConfig& cfg, Networks& nets, const IterationBatch& batch,
                     std::span<const std::size_t> ids, std::size_t n_agents) {
  ActorNet& actor = nets.actor;
  std::vector<SeqRow> rows;
  for (std::size_t id : ids) {
    for (std::size_t i = 0; i < n_agents; ++i) rows.push_back({&batch.chunks[id], i, batch.chunks[id].range.len});
  }
  sort_rows(rows);
  ActorPass out;
  for (const SeqRow& r : rows) out.samples += r.len;
  if (rows.empty()) return out;

  LstmState init(rows.size(), actor.hidden());
  for (std::size_t r = 0; r < rows.size(); ++r) init.set_row(r, rows[r].chunk->actor_states[rows[r].agent]);
  SequenceBatch seq;
  const std::size_t obs_w = actor.obs_width();
  for (std::size_t s = 0; s < rows.front().len; ++s) {
    const std::size_t active = active_at(rows, s);
    Tensor2 x(active, obs_w);
    std::vector<std::uint8_t> reset(active, 0);
    for (std::size_t r = 0; r < active; ++r) {
      const Chunk& c = *rows[r].chunk;
      const EnvRollout& ro = batch.envs[c.env].rollout;
      const std::size_t t = c.range.t0 + s;
      const auto& obs = ro.agents[rows[r].agent].transitions[t].obs;
      std::copy(obs.begin(), obs.end(), x.row(r).begin());
      if (s > 0) reset[r] = ro.reset_before[t];
    }
    seq.push_step(std::move(x), std::move(reset));
  }

  Trunk::Trace trace;
  const std::vector<Tensor2> features = actor.trunk.forward(seq, init, &trace);
  const ActionSpace& space = actor.action_space();
  const std::size_t hw = space.head_width();
  const double n = static_cast<double>(out.samples);
  const bool continuous = space.kind == ActionKind::kContinuous;

  std::vector<Tensor2> dhead(features.size());
  std::vector<double> dlogp(hw), dent(hw), dlogp_ls(hw), dent_ls(hw);
  std::vector<double> log_std_grad(continuous ? hw : 0, 0.0);
  double surr_sum = 0.0, ent_sum = 0.0;
  std::size_t clipped = 0;
  for (std::size_t s = 0; s < features.size(); ++s) {
    Tensor2 head;
    actor.head.forward(features[s], head);
    dhead[s] = Tensor2(head.rows, hw);
    for (std::size_t r = 0; r < head.rows; ++r) {
      const Chunk& c = *rows[r].chunk;
      const EnvData& d = batch.envs[c.env];
      const std::size_t t = c.range.t0 + s;
      const std::size_t agent = rows[r].agent;
      const Transition& tr = d.rollout.agents[agent].transitions[t];
      LogProbEntropy terms;
      if (continuous) {
        terms = gaussian_terms(head.row(r), actor.log_std.weights.values, tr.action.values, dlogp, dlogp_ls, dent_ls);
        std::fill(dent.begin(), dent.end(), 0.0);
      } else {
        terms = categorical_terms(head.row(r), tr.action.index, dlogp, dent);
      }
      const double ratio = prob_ratio(terms.log_prob, tr.old_log_prob);
      const double dratio = prob_ratio_grad(terms.log_prob, tr.old_log_prob);
      const SurrogateTerm surr = clipped_surrogate(ratio, d.advantages(t, agent), cfg.clip);
      surr_sum += surr.value;
      ent_sum += terms.entropy;
      if (surr.clipped) ++clipped;
      out.max_ratio_deviation = std::max(out.max_ratio_deviation, std::abs(ratio - 1.0));
      out.ratios.push_back(ratio);

      const double g_logp = -(surr.dvalue_dratio * dratio) / n;
      const double g_ent = -cfg.entropy_coef / n;
      auto dh = dhead[s].row(r);
      for (std::size_t k = 0; k < hw; ++k) dh[k] = g_logp * dlogp[k] + g_ent * dent[k];
      if (continuous) {
        for (std::size_t k = 0; k < hw; ++k) log_std_grad[k] += g_logp * dlogp_ls[k] + g_ent * dent_ls[k];
      }
    }
  }
  out.loss = -(surr_sum / n) - cfg.entropy_coef * (ent_sum / n);
  out.entropy = ent_sum / n;
  out.clip_fraction = static_cast<double>(clipped) / n;
  if (!std::isfinite(out.loss)) {
    throw NumericError("non-finite actor loss; " + describe_minibatch(batch, ids));
  }

  std::vector<Tensor2> dfeatures(features.size());
  for (std::size_t s = 0; s < features.size(); ++s) {
    dfeatures[s] = Tensor2(features[s].rows, features[s].cols);
    actor.head.backward(features[s], dhead[s], &dfeatures[s]);
  }
  actor.trunk.backward(trace, dfeatures);
  for (std::size_t k = 0; k < log_std_grad.size(); ++k) actor.log_std.grads.values[k] += log_std_grad[k];
  return out;
}

struct CriticPass {
  double loss = 0.0;
  double max_value_deviation = 0.0;
};

CriticPass critic_pass(Networks& nets, const IterationBatch& batch, std::span<const std::size_t> ids,
                       std::size_t n_agents) {
  CriticNet& critic = nets.critic;
  const bool meta_mode = batch.mode == CriticMode::kMeta;
  std::vector<SeqRow> rows;
  for (std::size_t id : ids) {
    const Chunk& c = batch.chunks[id];
    if (meta_mode) {
      rows.push_back({&c, 0, c.range.len * n_agents});
    } else {
      for (std::size_t i = 0; i < n_agents; ++i) rows.push_back({&c, i, c.range.len});
    }
  }
  sort_rows(rows);
  CriticPass out;
  if (rows.empty()) return out;

  auto entry_at = [&](const SeqRow& row, std::size_t s) -> const MetaEntry& {
    const MetaTrajectory& meta = batch.envs[row.chunk->env].meta;
    if (meta_mode) return meta.entries[row.chunk->range.t0 * n_agents + s];
    return entry_for(meta, row.chunk->range.t0 + s, row.agent);
  };

  LstmState init(rows.size(), critic.hidden());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    init.set_row(r, meta_mode ? rows[r].chunk->critic_meta_state : rows[r].chunk->critic_agent_states[rows[r].agent]);
  }
  SequenceBatch seq;
  std::size_t entries = 0;
  for (const SeqRow& r : rows) entries += r.len;
  for (std::size_t s = 0; s < rows.front().len; ++s) {
    const std::size_t active = active_at(rows, s);
    Tensor2 x(active, critic.input_width());
    std::vector<std::uint8_t> reset(active, 0);
    for (std::size_t r = 0; r < active; ++r) {
      const MetaEntry& e = entry_at(rows[r], s);
      std::copy(e.input.begin(), e.input.end(), x.row(r).begin());
      if (s > 0) reset[r] = meta_mode ? e.reset : batch.envs[rows[r].chunk->env].rollout.reset_before[e.t];
    }
    seq.push_step(std::move(x), std::move(reset));
  }

  Trunk::Trace trace;
  const std::vector<Tensor2> features = critic.trunk.forward(seq, init, &trace);
  const double n = static_cast<double>(entries);
  std::vector<Tensor2> dv(features.size());
  double sq = 0.0;
  for (std::size_t s = 0; s < features.size(); ++s) {
    Tensor2 v;
    critic.head.forward(features[s], v);
    dv[s] = Tensor2(v.rows, 1);
    for (std::size_t r = 0; r < v.rows; ++r) {
      const MetaEntry& e = entry_at(rows[r], s);
      const EnvData& d = batch.envs[rows[r].chunk->env];
      const double diff = v(r, 0) - d.returns(e.t, e.agent);
      sq += diff * diff;
      dv[s](r, 0) = 2.0 * diff / n;
      out.max_value_deviation = std::max(out.max_value_deviation, std::abs(v(r, 0) - d.values.values.v(e.t, e.agent)));
    }
  }
  out.loss = sq / n;
  if (!std::isfinite(out.loss)) {
    throw NumericError("non-finite critic loss; " + describe_minibatch(batch, ids));
  }

  std::vector<Tensor2> dfeatures(features.size());
  for (std::size_t s = 0; s < features.size(); ++s) {
    dfeatures[s] = Tensor2(features[s].rows, features[s].cols);
    critic.head.backward(features[s], dv[s], &dfeatures[s]);
  }
  critic.trunk.backward(trace, dfeatures);
  return out;
}

}  // namespace

std::vector<nn::ParamBlock*> Networks::all_blocks() {
  std::vector<nn::ParamBlock*> out = actor.blocks();
  for (nn::ParamBlock* b : critic.blocks()) out.push_back(b);
  return out;
}

Networks make_networks(const ExperimentConfig& cfg, const envs::MarkovGame& game) {
  Networks nets;
  const bool recurrent = variant_recurrent(cfg.variant);
  nets.critic_spec = CriticInputSpec{game.obs_width(), game.action_space(), cfg.critic_include_prev_action};
  nets.actor = ActorNet(game.obs_width(), cfg.actor_hidden, game.action_space(), recurrent);
  nets.critic = CriticNet(nets.critic_spec.width(), cfg.critic_hidden, recurrent);
  Rng actor_rng = make_rng(cfg.seed, {kInitTag, 0});
  Rng critic_rng = make_rng(cfg.seed, {kInitTag, 1});
  nets.actor.init(actor_rng);
  nets.critic.init(critic_rng);
  nn::AdamOptions opt;
  opt.lr = cfg.lr;
  nets.actor_opt = nn::Adam(opt);
  nets.critic_opt = nn::Adam(opt);
  return nets;
}

CriticMode critic_mode(const ExperimentConfig& cfg) {
  return variant_meta_critic(cfg.variant) ? CriticMode::kMeta : CriticMode::kPerAgent;
}

std::pair<Tensor2, Tensor2> compute_targets(const ExperimentConfig& cfg, const EnvRollout& rollout,
                                            const ValueMatrix& values) {
  const std::size_t T = rollout.horizon();
  const std::size_t N = rollout.num_agents();
  RewardMatrix rm{Tensor2(T, N), rollout.done};
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) rm.r(t, i) = rollout.agents[i].transitions[t].reward;
  }
  if (variant_combines_advantages(cfg.variant)) {
    const Tensor2 deltas = multi_agent_deltas(rm, values, cfg.gamma, cfg.beta);
    Tensor2 adv = gae(deltas, cfg.gamma, cfg.lambda, rm.done);
    Tensor2 ret = discounted_returns(rm, values.v.row(T), cfg.gamma, cfg.beta);
    return {std::move(adv), std::move(ret)};
  }
  Tensor2 adv(T, N), ret(T, N);
  std::vector<double> r(T), v(T + 1);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < T; ++t) r[t] = rm.r(t, i);
    for (std::size_t t = 0; t <= T; ++t) v[t] = values.v(t, i);
    const std::vector<double> a = single_agent_gae(r, v, cfg.gamma, cfg.lambda, rm.done);
    const std::vector<double> g = single_agent_returns(r, v[T], cfg.gamma, rm.done);
    for (std::size_t t = 0; t < T; ++t) {
      adv(t, i) = a[t];
      ret(t, i) = g[t];
    }
  }
  return {std::move(adv), std::move(ret)};
}

IterationBatch prepare_batch(const ExperimentConfig& cfg, Networks& nets, std::vector<EnvRollout> rollouts, Rng& rng) {
  IterationBatch batch;
  batch.mode = critic_mode(cfg);
  batch.envs.resize(rollouts.size());
  for (std::size_t e = 0; e < rollouts.size(); ++e) {
    EnvData& d = batch.envs[e];
    d.rollout = std::move(rollouts[e]);
    d.meta = build_meta_trajectory(d.rollout, nets.critic_spec, cfg.critic_hidden, rng);
    d.values = value_pass(d.meta, nets.critic, batch.mode, &d.rollout);
    std::tie(d.advantages, d.returns) = compute_targets(cfg, d.rollout, d.values.values);
    std::vector<Chunk> chunks = chunk_for_training(d.meta, d.values, d.rollout, cfg.seq_len, batch.mode, e);
    for (Chunk& c : chunks) batch.chunks.push_back(std::move(c));
    batch.samples += d.advantages.size();
  }
  if (cfg.normalize_advantages) {
    std::vector<double> flat;
    flat.reserve(batch.samples);
    for (const EnvData& d : batch.envs) flat.insert(flat.end(), d.advantages.values.begin(), d.advantages.values.end());
    batch.advantage_stats = normalize_in_place(flat);
    std::size_t k = 0;
    for (EnvData& d : batch.envs) {
      for (double& a : d.advantages.values) a = flat[k++];
    }
  }
  return batch;
}

MinibatchStats minibatch_gradients(const ExperimentConfig& cfg, Networks& nets, const IterationBatch& batch,
                                   std::span<const std::size_t> chunk_ids) {
  MinibatchStats st;
  if (batch.envs.empty() || chunk_ids.empty()) return st;
  const std::size_t n_agents = batch.envs.front().meta.num_agents;
  ActorPass a = actor_pass(cfg, nets, batch, chunk_ids, n_agents);
  const CriticPass c = critic_pass(nets, batch, chunk_ids, n_agents);
  st.actor_loss = a.loss;
  st.entropy = a.entropy;
  st.clip_fraction = a.clip_fraction;
  st.max_ratio_deviation = a.max_ratio_deviation;
  st.samples = a.samples;
  st.ratios = std::move(a.ratios);
  st.critic_loss = c.loss;
  st.max_value_deviation = c.max_value_deviation;
  return st;
}

TrainStats optimize(const ExperimentConfig& cfg, Networks& nets, const IterationBatch& batch, Rng& rng) {
  TrainStats st;
  st.samples = batch.samples;
  const std::size_t total = batch.chunks.size();
  if (total == 0) return st;
  const std::size_t m_count = cfg.minibatch_count(total);
  const std::size_t per = (total + m_count - 1) / m_count;

  std::vector<nn::ParamBlock*> actor_blocks = nets.actor_blocks();
  std::vector<nn::ParamBlock*> critic_blocks = nets.critic_blocks();
  nn::zero_grads(actor_blocks);
  nn::zero_grads(critic_blocks);

  std::vector<std::size_t> order(total);
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t m = 0; m < m_count; ++m) {
      const std::size_t begin = m * per;
      if (begin >= total) break;
      const std::span<const std::size_t> ids(order.data() + begin, std::min(per, total - begin));
      const MinibatchStats mb = minibatch_gradients(cfg, nets, batch, ids);
      if (epoch == 0 && m == 0) {
        st.first_ratio_deviation = mb.max_ratio_deviation;
        if (mb.max_ratio_deviation > kRatioInvariantTolerance) {
          throw ContractError("ratio invariant violated before the first update: max |ratio - 1| = " +
                              nn::format_double(mb.max_ratio_deviation));
        }
      }
      nn::clip_grad_norm(actor_blocks, cfg.max_grad_norm);
      nn::clip_grad_norm(critic_blocks, cfg.max_grad_norm);
      nets.actor_opt.step(actor_blocks);
      nets.critic_opt.step(critic_blocks);
      st.actor_loss += mb.actor_loss;
      st.critic_loss += mb.critic_loss;
      st.entropy += mb.entropy;
      st.clip_fraction += mb.clip_fraction;
      ++st.updates;
    }
  }
  const double u = static_cast<double>(st.updates);
  st.actor_loss /= u;
  st.critic_loss /= u;
  st.entropy /= u;
  st.clip_fraction /= u;
  return st;
}

TrainStats train_iteration(const ExperimentConfig& cfg, Networks& nets, std::span<EnvSlot> envs, Rng& rng) {
  std::vector<EnvRollout> rollouts = collect_rollout(envs, nets.actor, cfg.horizon, worker_count(cfg, envs.size()));
  const IterationBatch batch = prepare_batch(cfg, nets, std::move(rollouts), rng);
  return optimize(cfg, nets, batch, rng);
}

}  // namespace macrpo
