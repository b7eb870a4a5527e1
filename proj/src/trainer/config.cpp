#include "macrpo/trainer/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "macrpo/envs/env.hpp"
#include "macrpo/errors.hpp"
#include "macrpo/kernels.hpp"
#include "macrpo/nn/checkpoint.hpp"

namespace macrpo {

namespace {

constexpr std::pair<Variant, std::string_view> kVariantNames[] = {
    {Variant::kFfNic, "ff-nic"},     {Variant::kFfIca, "ff-ica"},     {Variant::kLstmNic, "lstm-nic"},
    {Variant::kLstmIca, "lstm-ica"}, {Variant::kLstmIcf, "lstm-icf"},
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError(key + ": " + what + " (got '" + value + "')");
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "expected a non-negative integer");
  return static_cast<std::size_t>(out);
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "expected a real number");
  return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  bad_value(key, value, "expected true or false");
}

std::string show(bool b) { return b ? "true" : "false"; }
std::string show(std::size_t v) { return std::to_string(v); }
std::string show(double v) { return nn::format_double(v); }

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define COUNT_FIELD(name)                                                                    \
  Field {                                                                                    \
    #name, [](ExperimentConfig& c, const std::string& v) { c.name = parse_count(#name, v); }, \
        [](const ExperimentConfig& c) { return show(c.name); }                               \
  }
#define REAL_FIELD(name)                                                                    \
  Field {                                                                                   \
    #name, [](ExperimentConfig& c, const std::string& v) { c.name = parse_real(#name, v); }, \
        [](const ExperimentConfig& c) { return show(c.name); }                              \
  }
#define FLAG_FIELD(name)                                                                    \
  Field {                                                                                   \
    #name, [](ExperimentConfig& c, const std::string& v) { c.name = parse_flag(#name, v); }, \
        [](const ExperimentConfig& c) { return show(c.name); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"env", [](ExperimentConfig& c, const std::string& v) { c.env = v; },
            [](const ExperimentConfig& c) { return c.env; }},
      Field{"variant", [](ExperimentConfig& c, const std::string& v) { c.variant = parse_variant(v); },
            [](const ExperimentConfig& c) { return std::string(variant_name(c.variant)); }},
      COUNT_FIELD(num_agents),
      COUNT_FIELD(num_envs),
      COUNT_FIELD(horizon),
      COUNT_FIELD(ppo_epochs),
      COUNT_FIELD(batch_size),
      COUNT_FIELD(minibatches),
      REAL_FIELD(gamma),
      REAL_FIELD(lambda),
      REAL_FIELD(beta),
      REAL_FIELD(clip),
      REAL_FIELD(entropy_coef),
      REAL_FIELD(lr),
      COUNT_FIELD(actor_hidden),
      COUNT_FIELD(critic_hidden),
      COUNT_FIELD(seq_len),
      REAL_FIELD(max_grad_norm),
      FLAG_FIELD(normalize_advantages),
      FLAG_FIELD(critic_include_prev_action),
      Field{"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse_count("seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      COUNT_FIELD(iterations),
      COUNT_FIELD(eval_episodes),
      COUNT_FIELD(rollout_threads),
      COUNT_FIELD(checkpoint_interval),
      FLAG_FIELD(wall_clock),
      Field{"kernels", [](ExperimentConfig& c, const std::string& v) { c.kernels = v; },
            [](const ExperimentConfig& c) { return c.kernels; }},
  };
  return table;
}

#undef COUNT_FIELD
#undef REAL_FIELD
#undef FLAG_FIELD

void require(bool ok, const char* key, const std::string& why) {
  if (!ok) throw ConfigError(std::string(key) + ": " + why);
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [variant, name] : kVariantNames) {
    if (variant == v) return name;
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames) {
    if (n == name) return variant;
  }
  throw ConfigError("variant: unknown variant '" + std::string(name) +
                    "' (expected ff-nic, ff-ica, lstm-nic, lstm-ica or lstm-icf)");
}

bool variant_recurrent(Variant v) { return v == Variant::kLstmNic || v == Variant::kLstmIca || v == Variant::kLstmIcf; }

bool variant_combines_advantages(Variant v) {
  return v == Variant::kFfIca || v == Variant::kLstmIca || v == Variant::kLstmIcf;
}

bool variant_meta_critic(Variant v) { return v == Variant::kLstmIcf; }

std::size_t ExperimentConfig::chunks_per_minibatch() const {
  const std::size_t per_chunk = seq_len * num_agents;
  return std::max<std::size_t>(1, per_chunk == 0 ? 1 : batch_size / per_chunk);
}

std::size_t ExperimentConfig::minibatch_count(std::size_t total_chunks) const {
  if (total_chunks == 0) return 0;
  if (minibatches > 0) return std::min(minibatches, total_chunks);
  const std::size_t b = chunks_per_minibatch();
  return (total_chunks + b - 1) / b;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError(key + ": unknown configuration key");
}

void validate(const ExperimentConfig& cfg) {
  require(envs::is_known_env(cfg.env), "env", "unknown environment '" + cfg.env + "'");
  require(cfg.num_agents >= 1, "num_agents", "must be at least 1");
  if (cfg.env != "coopnav") require(cfg.num_agents == 2, "num_agents", "the diagnostic game has exactly 2 agents");
  require(cfg.num_envs >= 1, "num_envs", "must be at least 1");
  require(cfg.horizon >= 1, "horizon", "must be at least 1");
  require(cfg.ppo_epochs >= 1, "ppo_epochs", "must be at least 1");
  require(cfg.batch_size >= 1, "batch_size", "must be at least 1");
  require(cfg.gamma > 0.0 && cfg.gamma <= 1.0, "gamma", "must lie in (0, 1]");
  require(cfg.lambda >= 0.0 && cfg.lambda <= 1.0, "lambda", "must lie in [0, 1]");
  require(cfg.beta >= 0.0 && cfg.beta <= 1.0, "beta", "must lie in [0, 1]");
  require(cfg.clip > 0.0 && cfg.clip < 1.0, "clip", "must lie in (0, 1)");
  require(cfg.entropy_coef >= 0.0 && std::isfinite(cfg.entropy_coef), "entropy_coef", "must be non-negative");
  require(cfg.lr > 0.0 && std::isfinite(cfg.lr), "lr", "must be positive");
  require(cfg.actor_hidden >= 1, "actor_hidden", "must be at least 1");
  require(cfg.critic_hidden >= 1, "critic_hidden", "must be at least 1");
  require(cfg.seq_len >= 1, "seq_len", "must be at least 1");
  require(cfg.max_grad_norm > 0.0 && std::isfinite(cfg.max_grad_norm), "max_grad_norm", "must be positive");
  require(cfg.eval_episodes >= 1, "eval_episodes", "must be at least 1");
  try {
    (void)kernels::parse_backend(cfg.kernels);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("kernels: ") + e.what());
  }
}

ExperimentConfig parse_config_text(std::string_view text, const ConfigOverrides& overrides) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    set_config_value(cfg, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
  validate(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path, const ConfigOverrides& overrides) {
  if (path.empty()) return parse_config_text({}, overrides);
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), overrides);
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + "=" + v + "\n";
  return out;
}

}  // namespace macrpo
