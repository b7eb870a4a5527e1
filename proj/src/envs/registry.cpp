#include "macrpo/envs/coopnav.hpp"
#include "macrpo/envs/diagnostic.hpp"
#include "macrpo/envs/env.hpp"
#include "macrpo/errors.hpp"

namespace macrpo::envs {

bool is_known_env(const std::string& name) {
  return name == "coopnav" || name == "diagnostic" || name == "diagnostic-continuous";
}

std::unique_ptr<MarkovGame> make_env(const std::string& name, std::size_t num_agents) {
  if (name == "coopnav") return std::make_unique<CoopNav>(num_agents);
  if (name == "diagnostic" || name == "diagnostic-continuous") {
    if (num_agents != 2) throw ConfigError("num_agents: the diagnostic game has exactly 2 agents");
    if (name == "diagnostic") return std::make_unique<DiagnosticGame>();
    return std::make_unique<DiagnosticContinuousGame>();
  }
  throw ConfigError("env: unknown environment '" + name + "'");
}

}  // namespace macrpo::envs
