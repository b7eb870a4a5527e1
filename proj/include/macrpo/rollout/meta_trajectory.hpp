#pragma once

// Interleaving of one environment's agent trajectories into a single critic
// sequence, the critic value pass over it, and training chunks.
//
// Entry k = t * N + p holds agent order_map[t][p] at time t. For N > 2 the
// order is one uniform permutation drawn per rollout and reused for every time
// step; for N <= 2 it is the identity.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "macrpo/advantage/advantage.hpp"
#include "macrpo/nn/tensor.hpp"
#include "macrpo/policy/networks.hpp"
#include "macrpo/random.hpp"
#include "macrpo/rollout/rollout.hpp"

namespace macrpo {

// Critic input: the agent's observation, optionally followed by its previous
// action (one-hot for discrete spaces, the raw values for continuous ones,
// zeros at episode starts).
struct CriticInputSpec {
  std::size_t obs_width = 0;
  ActionSpace action_space;
  bool include_prev_action = false;

  std::size_t width() const { return obs_width + (include_prev_action ? action_space.size : 0); }
};

std::vector<double> critic_input(std::span<const double> obs, const Action& prev_action, const CriticInputSpec& spec);

struct MetaEntry {
  std::size_t agent = 0;
  std::size_t t = 0;  // 0-based; t == T marks a bootstrap entry
  std::vector<double> input;
  std::uint8_t reset = 0;  // zero the critic state before this entry
};

struct MetaTrajectory {
  std::size_t num_agents = 0;
  std::size_t horizon = 0;
  std::vector<MetaEntry> entries;    // N * T
  std::vector<MetaEntry> bootstrap;  // N entries at t == T, same order
  std::vector<std::vector<std::size_t>> order_map;  // per t: position -> agent
  nn::LstmState initial_state;

  std::size_t index(std::size_t t, std::size_t position) const { return t * num_agents + position; }
};

// Builds the meta-trajectory. The permutation is drawn from `rng` only when
// N > 2.
MetaTrajectory build_meta_trajectory(const EnvRollout& rollout, const CriticInputSpec& spec, std::size_t critic_hidden,
                                     Rng& rng);

// Per-agent views of the meta entries in time order: result[i][t].
std::vector<std::vector<MetaEntry>> deinterleave(const MetaTrajectory& meta);

enum class CriticMode {
  kMeta,      // one sequence through all agents' entries
  kPerAgent,  // N independent sequences
};

struct ValuePassResult {
  ValueMatrix values;  // (T + 1) x N
  // kMeta: state before entry t * N for t in [0, T] (one row each).
  std::vector<nn::LstmState> meta_states;
  // kPerAgent: agent_states[i][t], state agent i's sequence enters t with.
  std::vector<std::vector<nn::LstmState>> agent_states;
};

// Runs the frozen critic over the rollout and writes old values into the
// transitions.
ValuePassResult value_pass(const MetaTrajectory& meta, const CriticNet& critic, CriticMode mode,
                           EnvRollout* rollout = nullptr);

struct ChunkRange {
  std::size_t t0 = 0;
  std::size_t len = 0;  // time steps
};

// Splits [0, T) into consecutive ranges of L steps; the last may be shorter.
std::vector<ChunkRange> chunk_ranges(std::size_t horizon, std::size_t seq_len);

// A training chunk: L time steps of one environment (L * N meta entries) plus
// the states every sequence in it starts from.
struct Chunk {
  std::size_t env = 0;
  ChunkRange range;
  nn::LstmState critic_meta_state;                // kMeta, one row
  std::vector<nn::LstmState> critic_agent_states; // kPerAgent, one per agent
  std::vector<nn::LstmState> actor_states;        // one per agent
};

std::vector<Chunk> chunk_for_training(const MetaTrajectory& meta, const ValuePassResult& values,
                                      const EnvRollout& rollout, std::size_t seq_len, CriticMode mode,
                                      std::size_t env_index = 0);

// The meta entries a chunk covers, in meta order.
std::span<const MetaEntry> chunk_entries(const MetaTrajectory& meta, const ChunkRange& range);

}  // namespace macrpo
