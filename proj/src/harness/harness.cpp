#include "macrpo/harness/harness.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "macrpo/errors.hpp"
#include "macrpo/kernels.hpp"
#include "macrpo/nn/checkpoint.hpp"
#include "macrpo/trainer/evaluate.hpp"

namespace macrpo {

namespace fs = std::filesystem;
using nn::format_double;

namespace {

constexpr std::uint64_t kTrainTag = 0x747261696eULL;
constexpr std::uint64_t kEvalTag = 0x6576616cULL;
constexpr std::uint64_t kResumeTag = 0x726573756dULL;

double parse_number(const std::string& tok, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("csv " + path.string() + ": bad number '" + tok + "'");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ls(line);
  while (std::getline(ls, cur, sep)) out.push_back(cur);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::string rng_text(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_text(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng;
  if (!is) throw ConfigError("checkpoint: bad generator state");
  return rng;
}

// Everything one seed's training loop owns.
struct SeedSession {
  ExperimentConfig cfg;
  std::unique_ptr<envs::MarkovGame> prototype;
  Networks nets;
  std::vector<EnvSlot> slots;
  Rng train_rng;
  std::size_t iteration = 0;

  explicit SeedSession(const ExperimentConfig& c)
      : cfg(c),
        prototype(envs::make_env(c.env, c.num_agents)),
        nets(make_networks(c, *prototype)),
        slots(make_env_slots(*prototype, c.num_envs, c.seed, c.actor_hidden)),
        train_rng(make_rng(c.seed, {kTrainTag})) {}

  void save(const fs::path& path) {
    std::vector<const nn::ParamBlock*> blocks;
    for (nn::ParamBlock* b : nets.all_blocks()) blocks.push_back(b);
    nn::CheckpointMeta meta{
        {"iteration", std::to_string(iteration)},
        {"seed", std::to_string(cfg.seed)},
        {"variant", std::string(variant_name(cfg.variant))},
        {"actor_adam_steps", std::to_string(nets.actor_opt.steps())},
        {"critic_adam_steps", std::to_string(nets.critic_opt.steps())},
        {"train_rng", rng_text(train_rng)},
    };
    nn::save_checkpoint(path, blocks, meta);
  }

  void load(const fs::path& path) {
    const std::vector<nn::ParamBlock*> blocks = nets.all_blocks();
    const nn::CheckpointMeta meta = nn::load_checkpoint(path, blocks);
    auto get = [&](const char* key) -> const std::string& {
      auto it = meta.find(key);
      if (it == meta.end()) throw ConfigError(std::string("checkpoint: missing meta '") + key + "'");
      return it->second;
    };
    if (get("variant") != variant_name(cfg.variant) || get("seed") != std::to_string(cfg.seed)) {
      throw ConfigError("checkpoint " + path.string() + " belongs to a different run");
    }
    iteration = std::stoull(get("iteration"));
    nets.actor_opt.set_steps(std::stoll(get("actor_adam_steps")));
    nets.critic_opt.set_steps(std::stoll(get("critic_adam_steps")));
    train_rng = rng_from_text(get("train_rng"));
    // Environment states are not checkpointed: episodes restart from fresh
    // resets drawn from a stream tied to the resume iteration.
    const std::uint64_t env_seed = make_rng(cfg.seed, {kResumeTag, iteration})();
    slots = make_env_slots(*prototype, cfg.num_envs, env_seed, cfg.actor_hidden);
  }
};

SeedRun run_seed(const ExperimentConfig& base, std::uint64_t seed, const RunOptions& options, const std::string& label) {
  ExperimentConfig cfg = base;
  cfg.seed = seed;
  SeedRun run;
  run.seed = seed;
  run.csv = options.out_dir / fmt::format("seed_{}.csv", seed);
  run.checkpoint = options.out_dir / fmt::format("seed_{}.ckpt", seed);

  SeedSession session(cfg);
  if (options.resume && fs::exists(run.checkpoint)) {
    session.load(run.checkpoint);
    if (fs::exists(run.csv)) {
      for (const TrainStats& s : read_csv(run.csv)) {
        if (s.iteration <= session.iteration) run.rows.push_back(s);
      }
    }
  }
  {
    std::string text = std::string(kCsvHeader) + "\n";
    for (const TrainStats& s : run.rows) text += csv_row(s) + "\n";
    write_text(run.csv, text);
  }
  std::ofstream csv(run.csv, std::ios::app);
  if (!csv) throw std::runtime_error("cannot append to " + run.csv.string());

  while (session.iteration < cfg.iterations) {
    const auto start = std::chrono::steady_clock::now();
    TrainStats st;
    try {
      st = train_iteration(cfg, session.nets, session.slots, session.train_rng);
    } catch (const NumericError& e) {
      write_text(options.out_dir / fmt::format("seed_{}.diagnostic.txt", seed),
                 fmt::format("iteration {}\n{}\n", session.iteration + 1, e.what()));
      throw;
    }
    ++session.iteration;
    st.iteration = session.iteration;
    Rng eval_rng = make_rng(seed, {kEvalTag, session.iteration});
    const EvalResult ev = evaluate(session.nets.actor, *session.prototype, cfg.eval_episodes, eval_rng);
    st.mean_eval_return = ev.mean;
    st.std_eval_return = ev.std;
    st.wall_time_s = cfg.wall_clock
                         ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                         : 0.0;
    run.rows.push_back(st);
    csv << csv_row(st) << '\n';
    csv.flush();
    if (!csv) throw std::runtime_error("failed writing " + run.csv.string());
    if (options.log != nullptr) {
      *options.log << fmt::format("[{} seed {}] iter {} eval {:.3f} +- {:.3f} actor {:.4f} critic {:.4f} "
                                  "entropy {:.3f} clip {:.3f} {:.2f}s\n",
                                  label, seed, st.iteration, st.mean_eval_return, st.std_eval_return, st.actor_loss,
                                  st.critic_loss, st.entropy, st.clip_fraction, st.wall_time_s)
                   << std::flush;
    }
    if (cfg.checkpoint_interval > 0 &&
        (session.iteration % cfg.checkpoint_interval == 0 || session.iteration == cfg.iterations)) {
      session.save(run.checkpoint);
    }
  }
  return run;
}

}  // namespace

std::string default_label(const ExperimentConfig& cfg) {
  return fmt::format("{}_beta{}", variant_name(cfg.variant), format_double(cfg.beta));
}

std::string csv_row(const TrainStats& s) {
  return fmt::format("{},{},{},{},{},{},{},{}", s.iteration, format_double(s.mean_eval_return),
                     format_double(s.std_eval_return), format_double(s.actor_loss), format_double(s.critic_loss),
                     format_double(s.entropy), format_double(s.clip_fraction), format_double(s.wall_time_s));
}

std::vector<TrainStats> read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw ConfigError("csv " + path.string() + ": bad header");
  std::vector<TrainStats> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 8) throw ConfigError("csv " + path.string() + ": expected 8 columns");
    TrainStats s;
    s.iteration = static_cast<std::size_t>(parse_number(f[0], path));
    s.mean_eval_return = parse_number(f[1], path);
    s.std_eval_return = parse_number(f[2], path);
    s.actor_loss = parse_number(f[3], path);
    s.critic_loss = parse_number(f[4], path);
    s.entropy = parse_number(f[5], path);
    s.clip_fraction = parse_number(f[6], path);
    s.wall_time_s = parse_number(f[7], path);
    out.push_back(s);
  }
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<TrainStats>>& per_seed) {
  std::map<std::size_t, std::vector<double>> by_iter;
  for (const auto& rows : per_seed) {
    for (const TrainStats& s : rows) by_iter[s.iteration].push_back(s.mean_eval_return);
  }
  std::vector<AggregateRow> out;
  for (const auto& [it, vals] : by_iter) {
    AggregateRow r;
    r.iteration = it;
    r.seeds = vals.size();
    double sum = 0.0;
    for (double v : vals) sum += v;
    r.mean = sum / static_cast<double>(vals.size());
    double sq = 0.0;
    for (double v : vals) sq += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(sq / static_cast<double>(vals.size()));
    out.push_back(r);
  }
  return out;
}

void write_aggregate(const fs::path& path, const std::vector<AggregateRow>& rows) {
  std::string text = std::string(kAggregateHeader) + "\n";
  for (const AggregateRow& r : rows) {
    text += fmt::format("{},{},{},{}\n", r.iteration, format_double(r.mean), format_double(r.std), r.seeds);
  }
  write_text(path, text);
}

std::vector<AggregateRow> read_aggregate(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kAggregateHeader) throw ConfigError("aggregate " + path.string() + ": bad header");
  std::vector<AggregateRow> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 4) throw ConfigError("aggregate " + path.string() + ": expected 4 columns");
    out.push_back({static_cast<std::size_t>(parse_number(f[0], path)), parse_number(f[1], path),
                   parse_number(f[2], path), static_cast<std::size_t>(parse_number(f[3], path))});
  }
  return out;
}

void write_manifest(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["label"] = m.label;
  j["out_dir"] = m.out_dir.string();
  j["seeds"] = m.seeds;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::istringstream cs(m.config_snapshot);
  for (std::string line; std::getline(cs, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config"] = cfg;
  j["aggregate_csv"] = m.aggregate_csv.string();
  j["runs"] = nlohmann::ordered_json::array();
  for (const SeedRun& r : m.runs) {
    nlohmann::ordered_json rj;
    rj["seed"] = r.seed;
    rj["csv"] = r.csv.string();
    rj["checkpoint"] = r.checkpoint.string();
    rj["rows"] = nlohmann::ordered_json::array();
    for (const TrainStats& s : r.rows) {
      rj["rows"].push_back({{"iteration", s.iteration},
                            {"mean_eval_return", s.mean_eval_return},
                            {"std_eval_return", s.std_eval_return},
                            {"actor_loss", s.actor_loss},
                            {"critic_loss", s.critic_loss},
                            {"entropy", s.entropy},
                            {"clip_fraction", s.clip_fraction},
                            {"wall_time_s", s.wall_time_s}});
    }
    j["runs"].push_back(std::move(rj));
  }
  write_text(m.out_dir / "manifest.json", j.dump(2) + "\n");
}

RunManifest run_experiment(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           const RunOptions& options) {
  validate(cfg);
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  kernels::select_backend(kernels::parse_backend(cfg.kernels));
  fs::create_directories(options.out_dir);

  RunManifest m;
  m.label = options.label.empty() ? default_label(cfg) : options.label;
  m.config_snapshot = format_config(cfg);
  m.seeds = seeds;
  m.out_dir = options.out_dir;
  m.aggregate_csv = options.out_dir / "aggregate.csv";
  write_text(options.out_dir / "config.txt", m.config_snapshot);

  m.runs.resize(seeds.size());
  if (options.seed_parallel && seeds.size() > 1) {
    std::vector<std::exception_ptr> errors(seeds.size());
    {
      std::vector<std::jthread> pool;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        pool.emplace_back([&, k] {
          try {
            m.runs[k] = run_seed(cfg, seeds[k], options, m.label);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t k = 0; k < seeds.size(); ++k) m.runs[k] = run_seed(cfg, seeds[k], options, m.label);
  }

  std::vector<std::vector<TrainStats>> per_seed;
  for (const SeedRun& r : m.runs) per_seed.push_back(r.rows);
  write_aggregate(m.aggregate_csv, aggregate(per_seed));
  write_manifest(m);
  return m;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const std::string& part : split(text, ',')) {
    if (part.empty()) continue;
    try {
      const auto dash = part.find('-', 1);
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const std::uint64_t lo = std::stoull(part.substr(0, dash));
        const std::uint64_t hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("seeds: empty range '" + part + "'");
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("seeds: cannot parse '" + part + "'");
    }
  }
  if (out.empty()) throw ConfigError("seeds: empty seed list");
  return out;
}

}  // namespace macrpo
