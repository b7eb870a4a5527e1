#include "macrpo/advantage/advantage.hpp"

#include <cmath>

#include "macrpo/errors.hpp"

namespace macrpo {

using nn::Tensor2;

double weighted_mean_reward(std::span<const double> values, std::size_t agent, double beta) {
  if (agent >= values.size()) throw ContractError("weighted_mean_reward: agent index out of range");
  double others = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (j != agent) others += values[j];
  }
  return (values[agent] + beta * others) / static_cast<double>(values.size());
}

Tensor2 discounted_returns(const RewardMatrix& rewards, std::span<const double> terminal_values, double gamma,
                           double beta) {
  const std::size_t T = rewards.horizon();
  const std::size_t N = rewards.agents();
  if (terminal_values.size() != N) throw ContractError("discounted_returns: terminal values need one per agent");
  if (rewards.done.size() != T) throw ContractError("discounted_returns: done flags need one per step");
  Tensor2 out(T, N);
  for (std::size_t i = 0; i < N; ++i) {
    double next = weighted_mean_reward(terminal_values, i, beta);
    for (std::size_t t = T; t-- > 0;) {
      const double mask = rewards.done[t] != 0 ? 0.0 : 1.0;
      next = weighted_mean_reward(rewards.r.row(t), i, beta) + gamma * mask * next;
      out(t, i) = next;
    }
  }
  return out;
}

Tensor2 multi_agent_deltas(const RewardMatrix& rewards, const ValueMatrix& values, double gamma, double beta) {
  const std::size_t T = rewards.horizon();
  const std::size_t N = rewards.agents();
  if (values.v.rows != T + 1 || values.v.cols != N) throw ContractError("multi_agent_deltas: value matrix shape");
  Tensor2 out(T, N);
  std::vector<double> td(N);
  for (std::size_t t = 0; t < T; ++t) {
    const double mask = rewards.done[t] != 0 ? 0.0 : 1.0;
    for (std::size_t j = 0; j < N; ++j) {
      td[j] = rewards.r(t, j) + gamma * mask * values.v(t + 1, j) - values.v(t, j);
    }
    for (std::size_t i = 0; i < N; ++i) out(t, i) = weighted_mean_reward(td, i, beta);
  }
  return out;
}

Tensor2 gae(const Tensor2& deltas, double gamma, double lambda, std::span<const std::uint8_t> done) {
  const std::size_t T = deltas.rows;
  if (done.size() != T) throw ContractError("gae: done flags need one per step");
  Tensor2 out(T, deltas.cols);
  for (std::size_t i = 0; i < deltas.cols; ++i) {
    double next = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      const double mask = (t + 1 == T || done[t] != 0) ? 0.0 : 1.0;
      next = deltas(t, i) + gamma * lambda * mask * next;
      out(t, i) = next;
    }
  }
  return out;
}

std::vector<double> single_agent_gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                                     double lambda, std::span<const std::uint8_t> done) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1 || done.size() != T) throw ContractError("single_agent_gae: shape mismatch");
  std::vector<double> out(T);
  double next = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double mask = done[t] != 0 ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * mask * values[t + 1] - values[t];
    next = delta + gamma * lambda * (t + 1 == T ? 0.0 : mask) * next;
    out[t] = next;
  }
  return out;
}

std::vector<double> single_agent_returns(std::span<const double> rewards, double terminal_value, double gamma,
                                         std::span<const std::uint8_t> done) {
  const std::size_t T = rewards.size();
  if (done.size() != T) throw ContractError("single_agent_returns: shape mismatch");
  std::vector<double> out(T);
  double next = terminal_value;
  for (std::size_t t = T; t-- > 0;) {
    const double mask = done[t] != 0 ? 0.0 : 1.0;
    next = rewards[t] + gamma * mask * next;
    out[t] = next;
  }
  return out;
}

NormalizationStats normalize_in_place(std::span<double> values) {
  NormalizationStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  s.applied = true;
  if (s.std > 1e-12) {
    for (double& v : values) v = (v - s.mean) / s.std;
  } else {
    for (double& v : values) v -= s.mean;
  }
  return s;
}

}  // namespace macrpo
