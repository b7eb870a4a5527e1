#include "macrpo/envs/diagnostic.hpp"

#include <algorithm>
#include <string>

#include "macrpo/errors.hpp"

namespace macrpo::envs {

std::array<double, 2> diagnostic_rewards(int a0, int a1) {
  if (a0 == 1 && a1 == 1) return {1.0, 1.0};
  auto one = [](int mine, int other) {
    if (mine == 0) return 0.2;
    return other == 0 ? 0.0 : 1.0;
  };
  return {one(a0, a1), one(a1, a0)};
}

Observations DiagnosticGame::reset(Rng&) { return Observations(2, std::vector<double>{1.0}); }

int DiagnosticGame::decode(const Action& a) const {
  if (a.index != 0 && a.index != 1) throw ContractError("diagnostic: invalid action index " + std::to_string(a.index));
  return a.index;
}

StepResult DiagnosticGame::step(const std::vector<Action>& actions) {
  if (actions.size() != 2) throw ContractError("diagnostic: expected two actions");
  const auto r = diagnostic_rewards(decode(actions[0]), decode(actions[1]));
  StepResult out;
  out.rewards = {r[0], r[1]};
  out.observations = Observations(2, std::vector<double>{1.0});
  out.done = true;
  return out;
}

int DiagnosticContinuousGame::decode(const Action& a) const {
  if (a.values.size() != 1) throw ContractError("diagnostic-continuous: expected a 1-d action");
  return std::clamp(a.values[0], -1.0, 1.0) >= 0.5 ? 1 : 0;
}

}  // namespace macrpo::envs
