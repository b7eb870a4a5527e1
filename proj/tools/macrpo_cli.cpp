// Command-line front end: runs one experiment per (variant, beta) pair over a
// seed list and optionally draws the comparison chart.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "macrpo/errors.hpp"
#include "macrpo/harness/harness.hpp"
#include "macrpo/harness/plot.hpp"
#include "macrpo/trainer/config.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent recurrent PPO experiments"};
  std::string config_path, env, variants, betas, seeds_text, out_dir = "runs", kernels_name;
  std::uint64_t seed = 0;
  std::size_t iterations = 0, threads = 0;
  bool plot = false, resume = false, seed_parallel = false, quiet = false;
  std::vector<std::string> sets;

  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--env", env, "coopnav | diagnostic | diagnostic-continuous");
  app.add_option("--variant", variants, "ff-nic | ff-ica | lstm-nic | lstm-ica | lstm-icf (comma list allowed)");
  app.add_option("--beta", betas, "weight of other agents' rewards and values (comma list allowed)");
  auto* seed_opt = app.add_option("--seed", seed, "single seed");
  auto* seeds_opt = app.add_option("--seeds", seeds_text, "seed list, e.g. 1-5 or 1,3,7");
  auto* iter_opt = app.add_option("--iterations", iterations, "training iterations per seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--plot", plot, "write plot.svg comparing all runs");
  app.add_option("--set", sets, "extra config override KEY=VALUE (repeatable)");
  auto* threads_opt = app.add_option("--threads", threads, "rollout worker threads (0 = one per environment)");
  app.add_option("--kernels", kernels_name, "auto | scalar | avx2 | neon");
  app.add_flag("--resume", resume, "continue each seed from its latest checkpoint");
  app.add_flag("--seed-parallel", seed_parallel, "run seeds concurrently");
  app.add_flag("--quiet", quiet, "no per-iteration log");
  seed_opt->excludes(seeds_opt);
  CLI11_PARSE(app, argc, argv);

  try {
    macrpo::ConfigOverrides overrides;
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw macrpo::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!env.empty()) overrides["env"] = env;
    if (!kernels_name.empty()) overrides["kernels"] = kernels_name;
    if (*iter_opt) overrides["iterations"] = std::to_string(iterations);
    if (*threads_opt) overrides["rollout_threads"] = std::to_string(threads);
    if (*seed_opt) overrides["seed"] = std::to_string(seed);
    if (env == "diagnostic" || env == "diagnostic-continuous") overrides.try_emplace("num_agents", "2");

    const std::vector<std::string> variant_list = split_list(variants);
    const std::vector<std::string> beta_list = split_list(betas);
    const macrpo::ExperimentConfig base = macrpo::parse_config(config_path, overrides);
    std::vector<std::uint64_t> seeds = *seeds_opt ? macrpo::parse_seed_list(seeds_text)
                                                  : std::vector<std::uint64_t>{base.seed};

    std::vector<macrpo::ExperimentConfig> configs;
    for (const std::string& v : variant_list.empty() ? std::vector<std::string>{""} : variant_list) {
      for (const std::string& b : beta_list.empty() ? std::vector<std::string>{""} : beta_list) {
        macrpo::ConfigOverrides o = overrides;
        if (!v.empty()) o["variant"] = v;
        if (!b.empty()) o["beta"] = b;
        configs.push_back(macrpo::parse_config(config_path, o));
      }
    }

    std::vector<macrpo::RunManifest> manifests;
    for (const macrpo::ExperimentConfig& cfg : configs) {
      macrpo::RunOptions opts;
      opts.label = macrpo::default_label(cfg);
      opts.out_dir = configs.size() == 1 ? std::filesystem::path(out_dir) : std::filesystem::path(out_dir) / opts.label;
      opts.resume = resume;
      opts.seed_parallel = seed_parallel;
      opts.log = quiet ? nullptr : &std::cout;
      manifests.push_back(macrpo::run_experiment(cfg, seeds, opts));
      std::cout << "wrote " << manifests.back().out_dir.string() << "/manifest.json\n";
    }
    if (plot) {
      const auto path = std::filesystem::path(out_dir) / "plot.svg";
      macrpo::emit_plot(manifests, path);
      std::cout << "wrote " << path.string() << "\n";
    }
  } catch (const macrpo::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
