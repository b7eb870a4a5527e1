#pragma once

// Return and advantage estimators.
//
// Multi-agent forms weight other agents' rewards and values by beta and divide
// by N:
//
//   rbar_t^i  = (r_t^i + beta * sum_{j != i} r_t^j) / N
//   R_t^i     = rbar_t^i + gamma (1 - done_t) R_{t+1}^i,      R_{T+1}^i = Vbar(o_T^i)
//   delta_t^i = (td_t^i + beta * sum_{j != i} td_t^j) / N,
//   td_t^j    = r_t^j + gamma (1 - done_t) V_{t+1}^j - V_t^j
//   A_t^i     = delta_t^i + gamma lambda (1 - done_t) A_{t+1}^i, A_T^i = delta_T^i
//
// With N = 1 every estimator reduces to its single-agent counterpart.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "macrpo/nn/tensor.hpp"

namespace macrpo {

// r(t, i) for t in [0, T), done[t] shared by all agents of the environment.
struct RewardMatrix {
  nn::Tensor2 r;
  std::vector<std::uint8_t> done;

  std::size_t horizon() const { return r.rows; }
  std::size_t agents() const { return r.cols; }
};

// v(t, i) for t in [0, T]; row T holds the bootstrap values V(o_T^i).
struct ValueMatrix {
  nn::Tensor2 v;
};

struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;
  bool applied = false;
};

struct AdvantageBatch {
  nn::Tensor2 advantages;  // T x N
  nn::Tensor2 returns;     // T x N
  NormalizationStats stats;
};

double weighted_mean_reward(std::span<const double> values, std::size_t agent, double beta);

nn::Tensor2 discounted_returns(const RewardMatrix& rewards, std::span<const double> terminal_values, double gamma,
                               double beta);

nn::Tensor2 multi_agent_deltas(const RewardMatrix& rewards, const ValueMatrix& values, double gamma, double beta);

nn::Tensor2 gae(const nn::Tensor2& deltas, double gamma, double lambda, std::span<const std::uint8_t> done);

// Plain GAE on one agent's stream; values has T + 1 entries.
std::vector<double> single_agent_gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                                     double lambda, std::span<const std::uint8_t> done);

// Plain discounted return on one agent's stream, bootstrapped from terminal_value.
std::vector<double> single_agent_returns(std::span<const double> rewards, double terminal_value, double gamma,
                                         std::span<const std::uint8_t> done);

// Shifts and scales in place to zero mean and unit (population) std. A
// constant input is only centered.
NormalizationStats normalize_in_place(std::span<double> values);

}  // namespace macrpo
