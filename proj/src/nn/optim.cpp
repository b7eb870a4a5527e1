#include "macrpo/nn/optim.hpp"

#include <cmath>
#include <string>

#include "macrpo/errors.hpp"
#include "macrpo/kernels.hpp"

namespace macrpo::nn {

void adam_step(std::span<ParamBlock* const> blocks, const AdamOptions& opt, std::int64_t t) {
  if (t < 1) throw ContractError("adam_step: step count must be >= 1");
  for (const ParamBlock* b : blocks) {
    if (!b->grads.all_finite()) throw NumericError("adam_step: non-finite gradient in block '" + b->name + "'");
  }
  const double td = static_cast<double>(t);
  const kernels::AdamCoeffs c{opt.lr, opt.beta1, opt.beta2, opt.eps,
                              1.0 - std::pow(opt.beta1, td), 1.0 - std::pow(opt.beta2, td)};
  const auto& k = kernels::active();
  for (ParamBlock* b : blocks) {
    k.adam_update(b->weights.data(), b->grads.data(), b->adam_m.data(), b->adam_v.data(), b->weights.size(), c);
  }
}

double global_grad_norm(std::span<ParamBlock* const> blocks) {
  const auto& k = kernels::active();
  double sq = 0.0;
  for (const ParamBlock* b : blocks) sq += k.sum_squares(b->grads.data(), b->grads.size());
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<ParamBlock* const> blocks, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad_norm: max_norm must be positive");
  const double norm = global_grad_norm(blocks);
  if (!(norm > max_norm)) return 1.0;
  const double factor = max_norm / norm;
  const auto& k = kernels::active();
  for (ParamBlock* b : blocks) k.scale(b->grads.data(), b->grads.size(), factor);
  return factor;
}

void zero_grads(std::span<ParamBlock* const> blocks) {
  for (ParamBlock* b : blocks) b->zero_grad();
}

}  // namespace macrpo::nn
