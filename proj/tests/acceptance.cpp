// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and run
// sizes are pinned below. Usage: acceptance [--criteria 1,2,...] [--out DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "macrpo/advantage/advantage.hpp"
#include "macrpo/envs/env.hpp"
#include "macrpo/errors.hpp"
#include "macrpo/harness/harness.hpp"
#include "macrpo/trainer/evaluate.hpp"
#include "macrpo/trainer/trainer.hpp"
#include "oracles.hpp"

using namespace macrpo;
namespace fs = std::filesystem;
namespace oracle = macrpo::testing;

namespace {

// Criterion 1
constexpr int kGradTrials = 100;
constexpr double kPrimitiveTol = 1e-4;
constexpr double kActorLossTol = 1e-3;
constexpr int kActorLossMaxAttempts = 400;

// Criterion 2
constexpr int kEstimatorInstances = 1000;
constexpr double kEstimatorTol = 1e-10;
constexpr double kIdenticalDeltaTol = 1e-14;

// Criterion 3
constexpr int kMetaInstances = 1000;

// Criterion 5
constexpr std::size_t kDiagSeeds = 5;
constexpr std::size_t kDiagMaxIterations = 200;
constexpr double kDiagTarget = 1.8;
constexpr std::size_t kDiagSeedsRequired = 4;

// Criterion 6
constexpr std::size_t kTrendSeeds = 5;
constexpr std::size_t kTrendIterations = 300;
constexpr std::size_t kTrendHorizon = 50;
constexpr std::size_t kTrendFinalWindow = 10;
constexpr double kTrendMarginSe = 0.5;
constexpr double kTrendBudgetSeconds = 7200.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_oracle() {
  Rng rng = make_rng(101);
  struct Prim {
    const char* name;
    std::function<double()> trial;
  };
  const Prim prims[] = {
      {"linear", [&] { return oracle::grad_trial_linear(rng); }},
      {"tanh", [&] { return oracle::grad_trial_tanh(rng); }},
      {"lstm", [&] { return oracle::grad_trial_lstm_cell(rng); }},
      {"trunk-lstm", [&] { return oracle::grad_trial_trunk(rng, true); }},
      {"trunk-ff", [&] { return oracle::grad_trial_trunk(rng, false); }},
      {"categorical", [&] { return oracle::grad_trial_categorical(rng); }},
      {"gaussian", [&] { return oracle::grad_trial_gaussian(rng); }},
  };
  Outcome out{true, ""};
  for (const Prim& p : prims) {
    double worst = 0.0;
    for (int k = 0; k < kGradTrials; ++k) worst = std::max(worst, p.trial());
    out.pass = out.pass && worst < kPrimitiveTol;
    out.detail += fmt::format("{}={:.2e} ", p.name, worst);
  }
  double worst = 0.0;
  int checked = 0, skipped = 0;
  for (int k = 0; k < kActorLossMaxAttempts && checked < kGradTrials; ++k) {
    const auto r = oracle::grad_trial_actor_loss(rng);
    if (r.skipped) {
      ++skipped;
      continue;
    }
    ++checked;
    worst = std::max(worst, r.max_rel_err);
  }
  out.pass = out.pass && checked >= kGradTrials && worst < kActorLossTol;
  out.detail += fmt::format("actor-loss={:.2e} ({} trials, {} kink-skipped)", worst, checked, skipped);
  return out;
}

Outcome estimator_oracle() {
  Rng rng = make_rng(202);
  const double betas[] = {0.0, 0.3, 1.0};
  double worst = 0.0;
  for (int k = 0; k < kEstimatorInstances; ++k) {
    const std::size_t T = 1 + rng() % 8, N = 1 + rng() % 3;
    worst = std::max(worst, oracle::estimator_trial(rng, T, N, betas[k % 3]));
  }

  bool collapse = true, identical = true;
  for (int k = 0; k < 200; ++k) {
    const std::size_t T = 1 + rng() % 8;
    const auto one = oracle::random_estimator_instance(rng, T, 1);
    const double beta = betas[k % 3];
    const nn::Tensor2 adv = gae(multi_agent_deltas(one.rewards, one.values, one.gamma, beta), one.gamma, one.lambda,
                                one.rewards.done);
    const std::vector<double> terminal{one.values.v(T, 0)};
    collapse = collapse &&
               adv.values == single_agent_gae(one.rewards.r.values, one.values.v.values, one.gamma, one.lambda,
                                              one.rewards.done) &&
               discounted_returns(one.rewards, terminal, one.gamma, beta).values ==
                   single_agent_returns(one.rewards.r.values, terminal[0], one.gamma, one.rewards.done);

    const std::size_t N = 2 + rng() % 2;
    const auto many = oracle::random_estimator_instance(rng, T, N);
    const nn::Tensor2 d = multi_agent_deltas(many.rewards, many.values, many.gamma, 1.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 1; i < N; ++i) identical = identical && std::abs(d(t, i) - d(t, 0)) <= kIdenticalDeltaTol;
  }
  return {worst < kEstimatorTol && collapse && identical,
          fmt::format("max |recursive - direct| = {:.2e} over {} instances; N=1 collapse {}; beta=1 identical deltas {}",
                      worst, kEstimatorInstances, collapse ? "exact" : "BROKEN", identical ? "yes" : "NO")};
}

Outcome meta_structure() {
  Rng rng = make_rng(303);
  for (int k = 0; k < kMetaInstances; ++k) {
    const std::string err = oracle::meta_structure_trial(rng, 4, 30);
    if (!err.empty()) return {false, fmt::format("instance {}: {}", k, err)};
  }
  return {true, fmt::format("{} instances: interleaving, round trip and bit-exact chunked critic", kMetaInstances)};
}

Outcome ratio_invariant() {
  double worst = 0.0;
  std::size_t runs = 0;
  for (const char* env : {"coopnav", "diagnostic", "diagnostic-continuous"}) {
    for (Variant v : {Variant::kFfNic, Variant::kFfIca, Variant::kLstmNic, Variant::kLstmIca, Variant::kLstmIcf}) {
      ExperimentConfig cfg;
      cfg.env = env;
      cfg.variant = v;
      cfg.num_agents = cfg.env == "coopnav" ? 3 : 2;
      cfg.horizon = cfg.env == "coopnav" ? 50 : 64;
      const auto game = envs::make_env(cfg.env, cfg.num_agents);
      Networks nets = make_networks(cfg, *game);
      auto slots = make_env_slots(*game, cfg.num_envs, cfg.seed, cfg.actor_hidden);
      Rng rng = make_rng(cfg.seed, {0x747261696e});
      try {
        const TrainStats st = train_iteration(cfg, nets, slots, rng);
        worst = std::max(worst, st.first_ratio_deviation);
      } catch (const ContractError& e) {
        return {false, fmt::format("{} on {}: {}", variant_name(v), env, e.what())};
      }
      ++runs;
    }
  }
  return {worst <= kRatioInvariantTolerance,
          fmt::format("max |ratio - 1| = {:.2e} over {} first iterations", worst, runs)};
}

Outcome diagnostic_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.env = "diagnostic";
  cfg.num_agents = 2;
  cfg.variant = Variant::kLstmIcf;
  cfg.beta = 1.0;
  cfg.num_envs = 4;
  cfg.horizon = 64;
  validate(cfg);
  const auto game = envs::make_env(cfg.env, cfg.num_agents);
  std::size_t reached = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= kDiagSeeds; ++seed) {
    cfg.seed = seed;
    Networks nets = make_networks(cfg, *game);
    auto slots = make_env_slots(*game, cfg.num_envs, seed, cfg.actor_hidden);
    Rng rng = make_rng(seed, {0x747261696e});
    std::size_t hit = 0;
    double last = 0.0;
    for (std::size_t it = 1; it <= kDiagMaxIterations && hit == 0; ++it) {
      train_iteration(cfg, nets, slots, rng);
      Rng eval_rng = make_rng(seed, {0x6576616c, it});
      last = evaluate(nets.actor, *game, cfg.eval_episodes, eval_rng).mean;
      if (last >= kDiagTarget) hit = it;
    }
    if (hit) ++reached;
    detail += hit ? fmt::format("seed {}: iter {}; ", seed, hit) : fmt::format("seed {}: no ({:.3f}); ", seed, last);
  }
  detail += fmt::format("{}/{} seeds in {:.0f} s", reached, kDiagSeeds, seconds_since(t0));
  return {reached >= kDiagSeedsRequired, detail};
}

struct FinalReturns {
  std::vector<double> per_seed;
  double mean = 0.0;
  double var = 0.0;  // sample variance
};

FinalReturns final_returns(const RunManifest& m) {
  FinalReturns f;
  for (const SeedRun& r : m.runs) {
    const auto rows = read_csv(r.csv);
    const std::size_t n = std::min(kTrendFinalWindow, rows.size());
    double s = 0.0;
    for (std::size_t k = rows.size() - n; k < rows.size(); ++k) s += rows[k].mean_eval_return;
    f.per_seed.push_back(s / static_cast<double>(n));
  }
  const double n = static_cast<double>(f.per_seed.size());
  for (double x : f.per_seed) f.mean += x / n;
  for (double x : f.per_seed) f.var += (x - f.mean) * (x - f.mean) / (n - 1.0);
  return f;
}

Outcome ablation_trend(const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= kTrendSeeds; ++s) seeds.push_back(s);
  struct Arm {
    Variant variant;
    double beta;
  };
  const Arm arms[] = {{Variant::kLstmIcf, 1.0}, {Variant::kLstmIcf, 0.0}, {Variant::kFfNic, 1.0}};
  std::vector<FinalReturns> res;
  for (const Arm& a : arms) {
    ExperimentConfig cfg;
    cfg.env = "coopnav";
    cfg.num_agents = 3;
    cfg.variant = a.variant;
    cfg.beta = a.beta;
    cfg.horizon = kTrendHorizon;
    cfg.iterations = kTrendIterations;
    validate(cfg);
    RunOptions opt;
    opt.out_dir = out / default_label(cfg);
    res.push_back(final_returns(run_experiment(cfg, seeds, opt)));
  }
  const double n = static_cast<double>(kTrendSeeds);
  auto compare = [&](const FinalReturns& a, const FinalReturns& b, const char* name, bool& ok) {
    const double se = std::sqrt(a.var / n + b.var / n);
    const double diff = a.mean - b.mean;
    ok = diff >= kTrendMarginSe * se;
    return fmt::format("{}: diff {:.3f}, SE {:.3f} ({:.2f} SE)", name, diff, se, se > 0 ? diff / se : 0.0);
  };
  bool ok1 = false, ok2 = false;
  std::string detail = fmt::format("final returns icf1 {:.3f}, icf0 {:.3f}, ffnic {:.3f}; ", res[0].mean, res[1].mean,
                                   res[2].mean);
  detail += compare(res[0], res[1], "icf1 - icf0", ok1) + "; ";
  detail += compare(res[0], res[2], "icf1 - ffnic", ok2);
  const double elapsed = seconds_since(t0);
  detail += fmt::format("; {:.0f} s of {:.0f} s budget", elapsed, kTrendBudgetSeconds);
  return {ok1 && ok2 && elapsed <= kTrendBudgetSeconds, detail};
}

Outcome determinism(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.env = "coopnav";
  cfg.num_agents = 3;
  cfg.num_envs = 4;
  cfg.horizon = 50;
  cfg.ppo_epochs = 3;
  cfg.actor_hidden = 32;
  cfg.critic_hidden = 32;
  cfg.iterations = 5;
  cfg.eval_episodes = 20;
  cfg.wall_clock = false;
  auto run = [&](const std::string& name, std::size_t threads) {
    ExperimentConfig c = cfg;
    c.rollout_threads = threads;
    RunOptions opt;
    opt.out_dir = out / name;
    fs::remove_all(opt.out_dir);
    const RunManifest m = run_experiment(c, {11}, opt);
    std::ifstream in(m.runs.at(0).csv, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = run("single_a", 1), b = run("single_b", 1), c = run("threaded", cfg.num_envs);
  const bool repeat = a == b, threaded = a == c;
  return {repeat && threaded && !a.empty(),
          fmt::format("repeat {}, {} workers {} ({} bytes)", repeat ? "identical" : "DIFFERENT", cfg.num_envs,
                      threaded ? "identical" : "DIFFERENT", a.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7};
  std::string out = (fs::temp_directory_path() / "macrpo_acceptance").string();
  app.add_option("--criteria", criteria, "criteria to run")->delimiter(',');
  app.add_option("--out", out, "directory for run outputs");
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (int c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      switch (c) {
        case 1: o = gradient_oracle(); break;
        case 2: o = estimator_oracle(); break;
        case 3: o = meta_structure(); break;
        case 4: o = ratio_invariant(); break;
        case 5: o = diagnostic_learning(); break;
        case 6: o = ablation_trend(fs::path(out) / "trend"); break;
        case 7: o = determinism(fs::path(out) / "determinism"); break;
        default: o = {false, "unknown criterion"}; break;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << fmt::format("criterion {}: {} [{:.1f} s] {}", c, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                             o.detail)
              << std::endl;
  }
  return all ? 0 : 1;
}
