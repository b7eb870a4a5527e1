#include "macrpo/policy/networks.hpp"

#include <algorithm>

#include "macrpo/errors.hpp"

namespace macrpo {

using nn::LstmState;
using nn::Tensor2;

namespace {

LstmState take_rows(const LstmState& s, std::size_t n) {
  if (s.rows() == n) return s;
  LstmState out(n, s.hidden());
  const std::size_t count = n * s.hidden();
  std::copy_n(s.h.values.begin(), count, out.h.values.begin());
  std::copy_n(s.c.values.begin(), count, out.c.values.begin());
  return out;
}

void add_prefix(Tensor2& dst, const Tensor2& src) {
  const std::size_t count = std::min(dst.size(), src.size());
  for (std::size_t i = 0; i < count; ++i) dst.values[i] += src.values[i];
}

void zero_row(Tensor2& t, std::size_t r) { std::fill(t.row(r).begin(), t.row(r).end(), 0.0); }

}  // namespace

void SequenceBatch::push_step(Tensor2 x, std::vector<std::uint8_t> reset_flags) {
  if (!active.empty() && x.rows > active.back()) throw ContractError("SequenceBatch: active rows must not increase");
  if (!reset_flags.empty() && reset_flags.size() != x.rows) throw ContractError("SequenceBatch: reset size mismatch");
  if (reset_flags.empty()) reset_flags.assign(x.rows, 0);
  active.push_back(x.rows);
  inputs.push_back(std::move(x));
  reset.push_back(std::move(reset_flags));
}

Trunk::Trunk(const std::string& name, std::size_t input, std::size_t hidden, bool recurrent)
    : embed_(name + ".embed", input, hidden), hidden_(hidden), recurrent_(recurrent) {
  if (recurrent_) {
    lstm_ = nn::LstmCell(name + ".lstm", hidden, hidden);
  } else {
    dense2_ = nn::Linear(name + ".dense2", hidden, hidden);
  }
}

void Trunk::init(Rng& rng) {
  embed_.init_uniform(rng);
  if (recurrent_) {
    lstm_.init_uniform(rng);
  } else {
    dense2_.init_uniform(rng);
  }
}

std::vector<nn::ParamBlock*> Trunk::blocks() {
  std::vector<nn::ParamBlock*> out = embed_.blocks();
  for (nn::ParamBlock* b : recurrent_ ? lstm_.blocks() : dense2_.blocks()) out.push_back(b);
  return out;
}

Tensor2 Trunk::step(const Tensor2& x, const LstmState& state, LstmState& next, StepTrace* trace,
                    std::size_t step_index) const {
  if (!x.all_finite()) throw NumericError("non-finite network input at step " + std::to_string(step_index));
  Tensor2 e;
  embed_.forward(x, e);
  nn::tanh_inplace(e);
  Tensor2 features;
  if (recurrent_) {
    lstm_.forward(e, state, next, trace != nullptr ? &trace->lstm : nullptr, step_index);
    features = next.h;
  } else {
    dense2_.forward(e, features);
    nn::tanh_inplace(features);
    next = state;
    if (trace != nullptr) trace->dense2 = features;
  }
  if (trace != nullptr) {
    trace->x = x;
    trace->embed = std::move(e);
  }
  return features;
}

std::vector<Tensor2> Trunk::forward(const SequenceBatch& batch, const LstmState& init, Trace* trace,
                                    std::vector<LstmState>* states_before, LstmState* final_state) const {
  if (init.rows() != batch.rows() || init.hidden() != hidden_) throw ContractError("Trunk::forward: bad initial state");
  std::vector<Tensor2> features;
  features.reserve(batch.steps());
  if (trace != nullptr) trace->assign(batch.steps(), StepTrace{});
  if (states_before != nullptr) states_before->clear();
  LstmState state = init;
  for (std::size_t s = 0; s < batch.steps(); ++s) {
    const std::size_t n = batch.active[s];
    state = take_rows(state, n);
    for (std::size_t r = 0; r < n; ++r) {
      if (batch.reset[s][r] != 0) {
        zero_row(state.h, r);
        zero_row(state.c, r);
      }
    }
    if (states_before != nullptr) states_before->push_back(state);
    LstmState next;
    StepTrace* st = trace != nullptr ? &(*trace)[s] : nullptr;
    features.push_back(step(batch.inputs[s], state, next, st, s));
    if (st != nullptr) st->reset = batch.reset[s];
    state = std::move(next);
  }
  if (final_state != nullptr) *final_state = std::move(state);
  return features;
}

void Trunk::backward(const Trace& trace, const std::vector<Tensor2>& dfeatures) {
  Tensor2 dh_carry, dc_carry;
  for (std::size_t s = trace.size(); s-- > 0;) {
    const StepTrace& st = trace[s];
    const std::size_t n = st.x.rows;
    Tensor2 de(n, hidden_);
    if (recurrent_) {
      Tensor2 dh = dfeatures[s];
      Tensor2 dc(n, hidden_);
      add_prefix(dh, dh_carry);
      add_prefix(dc, dc_carry);
      Tensor2 dh_prev, dc_prev;
      lstm_.backward(st.lstm, dh, dc, &de, dh_prev, dc_prev);
      for (std::size_t r = 0; r < n; ++r) {
        if (st.reset[r] != 0) {
          zero_row(dh_prev, r);
          zero_row(dc_prev, r);
        }
      }
      dh_carry = std::move(dh_prev);
      dc_carry = std::move(dc_prev);
    } else {
      Tensor2 d2 = dfeatures[s];
      nn::tanh_backward(st.dense2, d2);
      dense2_.backward(st.embed, d2, &de);
    }
    nn::tanh_backward(st.embed, de);
    embed_.backward(st.x, de, nullptr);
  }
}

ActorNet::ActorNet(std::size_t obs_width, std::size_t hidden, ActionSpace space, bool recurrent)
    : trunk("actor", obs_width, hidden, recurrent), head("actor.head", hidden, space.head_width()), space_(space) {
  if (space_.kind == ActionKind::kContinuous) log_std = nn::ParamBlock("actor.log_std", 1, space_.size);
}

void ActorNet::init(Rng& rng) {
  trunk.init(rng);
  head.init_uniform(rng);
  log_std.weights.fill(0.0);
}

Tensor2 ActorNet::step(const Tensor2& obs, const LstmState& state, LstmState& next) const {
  const Tensor2 features = trunk.step(obs, state, next);
  Tensor2 out;
  head.forward(features, out);
  return out;
}

ActionDistribution ActorNet::distribution(std::span<const double> head_row) const {
  std::vector<double> v(head_row.begin(), head_row.end());
  if (space_.kind == ActionKind::kDiscrete) return ActionDistribution::categorical(std::move(v));
  return ActionDistribution::gaussian(std::move(v), log_std.weights.values);
}

std::vector<nn::ParamBlock*> ActorNet::blocks() {
  std::vector<nn::ParamBlock*> out = trunk.blocks();
  for (nn::ParamBlock* b : head.blocks()) out.push_back(b);
  if (space_.kind == ActionKind::kContinuous) out.push_back(&log_std);
  return out;
}

CriticNet::CriticNet(std::size_t input_width, std::size_t hidden, bool recurrent)
    : trunk("critic", input_width, hidden, recurrent), head("critic.head", hidden, 1) {}

void CriticNet::init(Rng& rng) {
  trunk.init(rng);
  head.init_uniform(rng);
}

std::vector<nn::ParamBlock*> CriticNet::blocks() {
  std::vector<nn::ParamBlock*> out = trunk.blocks();
  for (nn::ParamBlock* b : head.blocks()) out.push_back(b);
  return out;
}

std::pair<ActionDistribution, LstmState> actor_forward(std::span<const double> obs, const LstmState& state,
                                                       const ActorNet& actor) {
  if (obs.size() != actor.obs_width()) {
    throw ConfigError("actor_forward: observation width " + std::to_string(obs.size()) + " != " +
                      std::to_string(actor.obs_width()));
  }
  Tensor2 x(1, obs.size());
  std::copy(obs.begin(), obs.end(), x.values.begin());
  LstmState next;
  const Tensor2 out = actor.step(x, state, next);
  return {actor.distribution(out.row(0)), std::move(next)};
}

CriticSequenceResult critic_forward_meta(const std::vector<std::vector<double>>& inputs, const LstmState& state0,
                                         const CriticNet& critic, const std::vector<std::uint8_t>& reset) {
  if (inputs.empty()) throw ContractError("critic_forward_meta: empty sequence");
  if (!reset.empty() && reset.size() != inputs.size()) throw ContractError("critic_forward_meta: reset size mismatch");
  SequenceBatch batch;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() != critic.input_width()) throw ConfigError("critic_forward_meta: input width mismatch");
    Tensor2 x(1, inputs[k].size());
    std::copy(inputs[k].begin(), inputs[k].end(), x.values.begin());
    batch.push_step(std::move(x), {static_cast<std::uint8_t>(reset.empty() ? 0 : reset[k])});
  }
  CriticSequenceResult result;
  std::vector<LstmState> before;
  const std::vector<Tensor2> features = critic.trunk.forward(batch, state0, nullptr, &before, &result.final_state);
  result.values.reserve(inputs.size());
  for (const Tensor2& f : features) {
    Tensor2 v;
    critic.head.forward(f, v);
    result.values.push_back(v.values[0]);
  }
  result.states = std::move(before);
  return result;
}

}  // namespace macrpo
