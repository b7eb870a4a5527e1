#pragma once

// Batched differentiable primitives. Rows are independent samples; every
// forward is a pure function of (inputs, parameters) and every backward
// accumulates into the ParamBlock gradient buffers.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "macrpo/nn/tensor.hpp"
#include "macrpo/random.hpp"

namespace macrpo::nn {

// y = x W + b, with W stored as [in x out] and b as [1 x out].
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out);

  std::size_t in() const { return weight.weights.rows; }
  std::size_t out() const { return weight.weights.cols; }

  // uniform(-k, k) with k = 1/sqrt(fan_in), for weights and bias.
  void init_uniform(Rng& rng);

  void forward(const Tensor2& x, Tensor2& y) const;
  std::vector<double> forward(std::span<const double> x) const;

  // Accumulates dW, db; if dx is non-null, dx += dy W^T (dx must be sized).
  void backward(const Tensor2& x, const Tensor2& dy, Tensor2* dx);

  std::vector<ParamBlock*> blocks() { return {&weight, &bias}; }

  ParamBlock weight;
  ParamBlock bias;
};

void tanh_inplace(Tensor2& t);
// dx = dy * (1 - y^2), where y = tanh(pre-activation).
void tanh_backward(const Tensor2& y, Tensor2& dy);

// Standard LSTM cell (no peepholes). Gate layout along the 4H axis: input,
// forget, candidate, output.
class LstmCell {
 public:
  struct Cache {
    Tensor2 x;
    Tensor2 h_prev;
    Tensor2 c_prev;
    Tensor2 gates;   // activated gates, rows x 4H
    Tensor2 c;
    Tensor2 tanh_c;
  };

  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t in, std::size_t hidden);

  std::size_t in() const { return wx.weights.rows; }
  std::size_t hidden() const { return wh.weights.rows; }

  // Weights uniform(-k, k), k = 1/sqrt(hidden); forget-gate bias 1, other biases 0.
  void init_uniform(Rng& rng);

  // next may alias nothing in prev. cache may be null for inference. step is
  // reported in the error raised on non-finite input.
  void forward(const Tensor2& x, const LstmState& prev, LstmState& next, Cache* cache,
               std::size_t step = 0) const;

  // dh, dc are gradients w.r.t. the cell outputs (h, c). Accumulates parameter
  // gradients, adds into dx (if non-null) and overwrites dh_prev, dc_prev.
  void backward(const Cache& cache, const Tensor2& dh, const Tensor2& dc, Tensor2* dx,
                Tensor2& dh_prev, Tensor2& dc_prev);

  std::vector<ParamBlock*> blocks() { return {&wx, &wh, &bias}; }

  ParamBlock wx;    // in x 4H
  ParamBlock wh;    // H x 4H
  ParamBlock bias;  // 1 x 4H
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace macrpo::nn
