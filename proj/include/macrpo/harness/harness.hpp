#pragma once

// Experiment orchestration: per-seed training loops with evaluation after
// every iteration, CSV logging, periodic checkpoints with resume, a cross-seed
// aggregate CSV and a JSON manifest.
//
// Layout under RunOptions::out_dir:
//   config.txt        frozen config snapshot
//   seed_<s>.csv      one row per iteration
//   seed_<s>.ckpt     latest checkpoint
//   aggregate.csv     per-iteration mean and std of mean_eval_return across seeds
//   manifest.json

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "macrpo/trainer/config.hpp"
#include "macrpo/trainer/trainer.hpp"

namespace macrpo {

inline constexpr const char* kCsvHeader =
    "iteration,mean_eval_return,std_eval_return,actor_loss,critic_loss,entropy,clip_fraction,wall_time_s";
inline constexpr const char* kAggregateHeader = "iteration,mean_eval_return,std_eval_return,seeds";

struct SeedRun {
  std::uint64_t seed = 0;
  std::filesystem::path csv;
  std::filesystem::path checkpoint;
  std::vector<TrainStats> rows;
};

struct RunManifest {
  std::string label;
  std::string config_snapshot;  // format_config output, fixed at run start
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  std::filesystem::path aggregate_csv;
  std::vector<SeedRun> runs;
};

struct RunOptions {
  std::filesystem::path out_dir = "runs";
  std::string label;          // defaults to "<variant>_beta<beta>"
  bool resume = false;        // continue each seed from its checkpoint if present
  bool seed_parallel = false; // one thread per seed
  std::ostream* log = nullptr;
};

std::string default_label(const ExperimentConfig& cfg);

RunManifest run_experiment(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           const RunOptions& options);

// CSV helpers.
std::string csv_row(const TrainStats& s);
std::vector<TrainStats> read_csv(const std::filesystem::path& path);

struct AggregateRow {
  std::size_t iteration = 0;
  double mean = 0.0;
  double std = 0.0;  // population std across seeds
  std::size_t seeds = 0;
};

// Per-iteration statistics over the seeds that reached each iteration.
std::vector<AggregateRow> aggregate(const std::vector<std::vector<TrainStats>>& per_seed);
void write_aggregate(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate(const std::filesystem::path& path);

void write_manifest(const RunManifest& manifest);

// Parses "1,2,3", "1-5" or a mix such as "1-3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace macrpo
