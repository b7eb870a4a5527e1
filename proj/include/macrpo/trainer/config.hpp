#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace macrpo {

enum class Variant { kFfNic, kFfIca, kLstmNic, kLstmIca, kLstmIcf };

std::string_view variant_name(Variant v);  // "lstm-icf", ...
Variant parse_variant(std::string_view name);  // throws ConfigError
bool variant_recurrent(Variant v);
// ICA and ICF combine agents' information in the advantage estimator.
bool variant_combines_advantages(Variant v);
// Only ICF feeds the critic the interleaved multi-agent sequence.
bool variant_meta_critic(Variant v);

// Defaults are the particle-world hyperparameters.
struct ExperimentConfig {
  std::string env = "coopnav";
  Variant variant = Variant::kLstmIcf;
  std::size_t num_agents = 3;    // N
  std::size_t num_envs = 4;      // E
  std::size_t horizon = 100;     // T, steps per environment per iteration
  std::size_t ppo_epochs = 10;   // K
  std::size_t batch_size = 1500; // samples per minibatch, rounded to whole chunks
  std::size_t minibatches = 0;   // M; 0 derives it from batch_size
  double gamma = 0.99;
  double lambda = 0.95;
  double beta = 1.0;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double lr = 0.005;
  std::size_t actor_hidden = 128;
  std::size_t critic_hidden = 128;
  std::size_t seq_len = 3;  // L
  double max_grad_norm = 1.0;
  bool normalize_advantages = true;
  bool critic_include_prev_action = false;
  std::uint64_t seed = 1;

  // Run-level settings.
  std::size_t iterations = 300;
  std::size_t eval_episodes = 100;
  std::size_t rollout_threads = 1;  // 0 means one worker per environment
  std::size_t checkpoint_interval = 10;
  bool wall_clock = true;  // false writes 0 into wall_time_s
  std::string kernels = "auto";

  // Chunks per minibatch and the resulting minibatch count for `total_chunks`.
  std::size_t chunks_per_minibatch() const;
  std::size_t minibatch_count(std::size_t total_chunks) const;
};

using ConfigOverrides = std::map<std::string, std::string>;

// Applies one key=value pair; throws ConfigError naming the key when the key
// is unknown or the value does not parse.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Range checks; throws ConfigError naming the first offending key.
void validate(const ExperimentConfig& cfg);

// Reads `key=value` lines (`#` starts a comment) over the defaults, then
// applies overrides. An empty path skips the file.
ExperimentConfig parse_config(const std::string& path, const ConfigOverrides& overrides = {});
ExperimentConfig parse_config_text(std::string_view text, const ConfigOverrides& overrides = {});

// Every key with its value, in a fixed order; parse_config_text round-trips it.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);
std::string format_config(const ExperimentConfig& cfg);

}  // namespace macrpo
