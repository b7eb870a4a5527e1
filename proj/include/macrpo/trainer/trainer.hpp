#pragma once

// One training iteration: collect rollouts with the frozen actor, evaluate
// the frozen critic, compute returns and advantages for the configured
// variant, then K epochs of shuffled chunk minibatches with separate actor and
// critic Adam updates.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "macrpo/advantage/advantage.hpp"
#include "macrpo/envs/env.hpp"
#include "macrpo/nn/optim.hpp"
#include "macrpo/policy/networks.hpp"
#include "macrpo/random.hpp"
#include "macrpo/rollout/meta_trajectory.hpp"
#include "macrpo/rollout/rollout.hpp"
#include "macrpo/trainer/config.hpp"

namespace macrpo {

inline constexpr double kRatioInvariantTolerance = 1e-6;

struct TrainStats {
  std::size_t iteration = 0;
  double mean_eval_return = 0.0;
  double std_eval_return = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double wall_time_s = 0.0;

  // Largest |ratio - 1| in the first minibatch before any update.
  double first_ratio_deviation = 0.0;
  std::size_t updates = 0;
  std::size_t samples = 0;

  friend bool operator==(const TrainStats&, const TrainStats&) = default;
};

struct Networks {
  ActorNet actor;
  CriticNet critic;
  nn::Adam actor_opt;
  nn::Adam critic_opt;
  CriticInputSpec critic_spec;

  std::vector<nn::ParamBlock*> actor_blocks() { return actor.blocks(); }
  std::vector<nn::ParamBlock*> critic_blocks() { return critic.blocks(); }
  std::vector<nn::ParamBlock*> all_blocks();
};

// Builds and initializes networks for `game` from make_rng(cfg.seed, ...).
Networks make_networks(const ExperimentConfig& cfg, const envs::MarkovGame& game);

CriticMode critic_mode(const ExperimentConfig& cfg);

struct EnvData {
  EnvRollout rollout;
  MetaTrajectory meta;
  ValuePassResult values;
  nn::Tensor2 advantages;  // T x N, normalized if enabled
  nn::Tensor2 returns;     // T x N, critic targets
};

struct IterationBatch {
  std::vector<EnvData> envs;
  std::vector<Chunk> chunks;
  CriticMode mode = CriticMode::kMeta;
  NormalizationStats advantage_stats;
  std::size_t samples = 0;  // agent-steps
};

// Builds meta-trajectories, runs the value pass, computes advantages and
// targets, and cuts chunks. `rng` supplies the meta-trajectory permutations.
IterationBatch prepare_batch(const ExperimentConfig& cfg, Networks& nets, std::vector<EnvRollout> rollouts, Rng& rng);

// Raw (unnormalized) advantages and returns of one environment's data for the
// configured variant.
std::pair<nn::Tensor2, nn::Tensor2> compute_targets(const ExperimentConfig& cfg, const EnvRollout& rollout,
                                                    const ValueMatrix& values);

struct MinibatchStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_deviation = 0.0;
  double max_value_deviation = 0.0;  // |V - V_old| over the minibatch entries
  std::size_t samples = 0;
  std::vector<double> ratios;  // per actor sample, in evaluation order
};

// Forward and backward over the chunks `chunk_ids`, accumulating gradients
// into both networks (no optimizer step). Throws NumericError with a dump of
// the minibatch if a loss is non-finite.
MinibatchStats minibatch_gradients(const ExperimentConfig& cfg, Networks& nets, const IterationBatch& batch,
                                   std::span<const std::size_t> chunk_ids);

// Full iteration. `rng` drives permutations and minibatch shuffles.
TrainStats train_iteration(const ExperimentConfig& cfg, Networks& nets, std::span<EnvSlot> envs, Rng& rng);

// Runs the optimization phase on an already prepared batch.
TrainStats optimize(const ExperimentConfig& cfg, Networks& nets, const IterationBatch& batch, Rng& rng);

}  // namespace macrpo
