#pragma once

#include <cstdint>
#include <span>

#include "macrpo/nn/tensor.hpp"

namespace macrpo::nn {

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update for step t (t >= 1), applied in place. Gradients
// are zeroed afterwards. Throws NumericError naming the first block whose
// gradient is non-finite; in that case no block is modified.
void adam_step(std::span<ParamBlock* const> blocks, const AdamOptions& opt, std::int64_t t);

// Scales all gradients by max_norm / ||g|| when the global L2 norm exceeds
// max_norm. Returns the factor applied (1 when no scaling happened).
double clip_grad_norm(std::span<ParamBlock* const> blocks, double max_norm);

double global_grad_norm(std::span<ParamBlock* const> blocks);

void zero_grads(std::span<ParamBlock* const> blocks);

class Adam {
 public:
  explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

  void step(std::span<ParamBlock* const> blocks) { adam_step(blocks, opt_, ++t_); }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamOptions& options() const { return opt_; }

 private:
  AdamOptions opt_;
  std::int64_t t_ = 0;
};

}  // namespace macrpo::nn
