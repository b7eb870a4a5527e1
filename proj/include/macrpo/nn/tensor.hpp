#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace macrpo::nn {

// Row-major dense matrix of doubles.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  static Tensor2 from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  std::size_t size() const { return values.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }

  void fill(double v);
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

// A named trainable tensor with its gradient buffer and Adam moments.
struct ParamBlock {
  std::string name;
  Tensor2 weights;
  Tensor2 grads;
  Tensor2 adam_m;
  Tensor2 adam_v;

  ParamBlock() = default;
  ParamBlock(std::string block_name, std::size_t rows, std::size_t cols);

  void zero_grad() { grads.fill(0.0); }
};

// Hidden and cell state for a batch of LSTM rows (rows x hidden each).
struct LstmState {
  Tensor2 h;
  Tensor2 c;

  LstmState() = default;
  LstmState(std::size_t rows, std::size_t hidden) : h(rows, hidden), c(rows, hidden) {}

  std::size_t rows() const { return h.rows; }
  std::size_t hidden() const { return h.cols; }

  // Single-row copy of row r.
  LstmState slice(std::size_t r) const;
  void set_row(std::size_t r, const LstmState& one);

  friend bool operator==(const LstmState&, const LstmState&) = default;
};

}  // namespace macrpo::nn
