#pragma once

// Two-agent one-shot coordination game with a known optimum.
//
//   both play 1              -> each gets 1.0 (team total 2.0, the unique optimum)
//   agent plays 0            -> that agent gets 0.2
//   agent plays 1, other 0   -> that agent gets 0.0
//
// Observation is the constant 1.0 for both agents.

#include <array>

#include "macrpo/envs/env.hpp"

namespace macrpo::envs {

std::array<double, 2> diagnostic_rewards(int a0, int a1);

class DiagnosticGame : public MarkovGame {
 public:
  std::string name() const override { return "diagnostic"; }
  std::size_t num_agents() const override { return 2; }
  std::size_t obs_width() const override { return 1; }
  ActionSpace action_space() const override { return {ActionKind::kDiscrete, 2}; }

  Observations reset(Rng& rng) override;
  StepResult step(const std::vector<Action>& actions) override;
  std::unique_ptr<MarkovGame> clone() const override { return std::make_unique<DiagnosticGame>(*this); }

 protected:
  virtual int decode(const Action& a) const;
};

// Continuous-action wrapper: one action dimension, clamped to [-1, 1];
// values >= 0.5 play 1, everything else plays 0.
class DiagnosticContinuousGame final : public DiagnosticGame {
 public:
  std::string name() const override { return "diagnostic-continuous"; }
  ActionSpace action_space() const override { return {ActionKind::kContinuous, 1}; }
  std::unique_ptr<MarkovGame> clone() const override { return std::make_unique<DiagnosticContinuousGame>(*this); }

 protected:
  int decode(const Action& a) const override;
};

}  // namespace macrpo::envs
