#include "macrpo/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "macrpo/errors.hpp"

namespace macrpo::nn {

Tensor2 Tensor2::from_rows(const std::vector<std::vector<double>>& rows) {
  Tensor2 t(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols) throw ContractError("Tensor2::from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
  }
  return t;
}

void Tensor2::fill(double v) { std::fill(values.begin(), values.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ParamBlock::ParamBlock(std::string block_name, std::size_t rows, std::size_t cols)
    : name(std::move(block_name)),
      weights(rows, cols),
      grads(rows, cols),
      adam_m(rows, cols),
      adam_v(rows, cols) {}

LstmState LstmState::slice(std::size_t r) const {
  LstmState out(1, hidden());
  std::copy_n(h.row(r).begin(), hidden(), out.h.values.begin());
  std::copy_n(c.row(r).begin(), hidden(), out.c.values.begin());
  return out;
}

void LstmState::set_row(std::size_t r, const LstmState& one) {
  std::copy_n(one.h.values.begin(), hidden(), h.row(r).begin());
  std::copy_n(one.c.values.begin(), hidden(), c.row(r).begin());
}

}  // namespace macrpo::nn
