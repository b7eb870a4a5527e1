#pragma once

// Actor and critic networks: dense embedding with tanh, then either one LSTM
// layer (recurrent variants) or a second dense+tanh layer of the same width
// (feed-forward variants), then a dense head.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "macrpo/nn/layers.hpp"
#include "macrpo/nn/tensor.hpp"
#include "macrpo/policy/distribution.hpp"
#include "macrpo/random.hpp"

namespace macrpo {

// A batch of sequences evaluated in lockstep. Rows are sorted so that the
// rows still running at step s are exactly the first active[s] rows; active
// is non-increasing.
struct SequenceBatch {
  std::vector<std::size_t> active;
  std::vector<nn::Tensor2> inputs;               // step s: active[s] x input width
  std::vector<std::vector<std::uint8_t>> reset;  // step s: zero the state of row r before the step

  std::size_t steps() const { return inputs.size(); }
  std::size_t rows() const { return active.empty() ? 0 : active.front(); }
  // Appends a step; `reset_flags` may be empty (no resets).
  void push_step(nn::Tensor2 x, std::vector<std::uint8_t> reset_flags = {});
};

class Trunk {
 public:
  struct StepTrace {
    nn::Tensor2 x;
    nn::Tensor2 embed;               // tanh(embed(x))
    nn::LstmCell::Cache lstm;        // recurrent only
    nn::Tensor2 dense2;              // feed-forward only: tanh(dense2(embed))
    std::vector<std::uint8_t> reset;
  };
  using Trace = std::vector<StepTrace>;

  Trunk() = default;
  Trunk(const std::string& name, std::size_t input, std::size_t hidden, bool recurrent);

  std::size_t input() const { return embed_.in(); }
  std::size_t hidden() const { return hidden_; }
  bool recurrent() const { return recurrent_; }

  void init(Rng& rng);

  // One step for `x.rows` rows. Returns features (rows x hidden).
  nn::Tensor2 step(const nn::Tensor2& x, const nn::LstmState& state, nn::LstmState& next,
                   StepTrace* trace = nullptr, std::size_t step_index = 0) const;

  // Runs a SequenceBatch from `init` (rows() x hidden). If states_before is
  // given it receives, for each step, the state each active row starts that
  // step from (after resets). final_state receives the state after the last
  // step (active.back() rows).
  std::vector<nn::Tensor2> forward(const SequenceBatch& batch, const nn::LstmState& init, Trace* trace,
                                   std::vector<nn::LstmState>* states_before = nullptr,
                                   nn::LstmState* final_state = nullptr) const;

  // Truncated BPTT over a trace: gradient into the initial state is dropped.
  void backward(const Trace& trace, const std::vector<nn::Tensor2>& dfeatures);

  std::vector<nn::ParamBlock*> blocks();

 private:
  nn::Linear embed_;
  nn::LstmCell lstm_;
  nn::Linear dense2_;
  std::size_t hidden_ = 0;
  bool recurrent_ = true;
};

class ActorNet {
 public:
  ActorNet() = default;
  ActorNet(std::size_t obs_width, std::size_t hidden, ActionSpace space, bool recurrent);

  void init(Rng& rng);

  std::size_t obs_width() const { return trunk.input(); }
  std::size_t hidden() const { return trunk.hidden(); }
  const ActionSpace& action_space() const { return space_; }

  // Batched single step: head outputs (rows x head width).
  nn::Tensor2 step(const nn::Tensor2& obs, const nn::LstmState& state, nn::LstmState& next) const;
  ActionDistribution distribution(std::span<const double> head_row) const;

  std::vector<nn::ParamBlock*> blocks();

  Trunk trunk;
  nn::Linear head;
  nn::ParamBlock log_std;  // 1 x dims, continuous only (empty otherwise)

 private:
  ActionSpace space_;
};

class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(std::size_t input_width, std::size_t hidden, bool recurrent);

  void init(Rng& rng);

  std::size_t input_width() const { return trunk.input(); }
  std::size_t hidden() const { return trunk.hidden(); }

  std::vector<nn::ParamBlock*> blocks();

  Trunk trunk;
  nn::Linear head;  // hidden -> 1
};

// Single-agent convenience wrapper: one step of the shared actor.
std::pair<ActionDistribution, nn::LstmState> actor_forward(std::span<const double> obs, const nn::LstmState& state,
                                                           const ActorNet& actor);

struct CriticSequenceResult {
  std::vector<double> values;
  std::vector<nn::LstmState> states;  // state before entry k (single row)
  nn::LstmState final_state;
};

// Evaluates the critic over one ordered sequence of inputs with the hidden
// state flowing through every entry. reset[k] != 0 zeroes the state before
// entry k; pass an empty vector for no resets.
CriticSequenceResult critic_forward_meta(const std::vector<std::vector<double>>& inputs, const nn::LstmState& state0,
                                         const CriticNet& critic, const std::vector<std::uint8_t>& reset = {});

}  // namespace macrpo
