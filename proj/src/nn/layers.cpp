#include "macrpo/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "macrpo/errors.hpp"
#include "macrpo/kernels.hpp"

namespace macrpo::nn {
namespace {

void broadcast_bias(const ParamBlock& bias, std::size_t rows, Tensor2& y) {
  const std::size_t n = bias.weights.cols;
  if (y.rows != rows || y.cols != n) y = Tensor2(rows, n);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(bias.weights.values.begin(), n, y.row(r).begin());
}

void accumulate_bias_grad(const Tensor2& dy, ParamBlock& bias) {
  double* g = bias.grads.data();
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double* d = dy.row(r).data();
    for (std::size_t j = 0; j < dy.cols; ++j) g[j] += d[j];
  }
}

void fill_uniform(Tensor2& t, double k, Rng& rng) {
  std::uniform_real_distribution<double> dist(-k, k);
  for (double& v : t.values) v = dist(rng);
}

}  // namespace

Linear::Linear(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".w", in, out), bias(name + ".b", 1, out) {}

void Linear::init_uniform(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in()));
  fill_uniform(weight.weights, k, rng);
  fill_uniform(bias.weights, k, rng);
}

void Linear::forward(const Tensor2& x, Tensor2& y) const {
  if (x.cols != in()) {
    throw ConfigError("linear '" + weight.name + "': input width " + std::to_string(x.cols) +
                      " != " + std::to_string(in()));
  }
  broadcast_bias(bias, x.rows, y);
  if (x.rows == 0) return;
  kernels::active().gemm_acc(x.data(), x.rows, in(), weight.weights.data(), out(), y.data());
}

std::vector<double> Linear::forward(std::span<const double> x) const {
  Tensor2 in_t(1, x.size());
  std::copy(x.begin(), x.end(), in_t.values.begin());
  Tensor2 y;
  forward(in_t, y);
  return y.values;
}

void Linear::backward(const Tensor2& x, const Tensor2& dy, Tensor2* dx) {
  if (dy.rows != x.rows || dy.cols != out()) throw ContractError("linear backward: shape mismatch");
  if (x.rows == 0) return;
  const auto& k = kernels::active();
  k.gemm_tn_acc(x.data(), x.rows, in(), dy.data(), out(), weight.grads.data());
  accumulate_bias_grad(dy, bias);
  if (dx != nullptr) k.gemm_nt_acc(dy.data(), dy.rows, out(), weight.weights.data(), in(), dx->data());
}

void tanh_inplace(Tensor2& t) {
  for (double& v : t.values) v = std::tanh(v);
}

void tanh_backward(const Tensor2& y, Tensor2& dy) {
  for (std::size_t i = 0; i < y.values.size(); ++i) dy.values[i] *= 1.0 - y.values[i] * y.values[i];
}

LstmCell::LstmCell(const std::string& name, std::size_t in, std::size_t hidden)
    : wx(name + ".wx", in, 4 * hidden), wh(name + ".wh", hidden, 4 * hidden), bias(name + ".b", 1, 4 * hidden) {}

void LstmCell::init_uniform(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden()));
  fill_uniform(wx.weights, k, rng);
  fill_uniform(wh.weights, k, rng);
  bias.weights.fill(0.0);
  const std::size_t h = hidden();
  for (std::size_t j = h; j < 2 * h; ++j) bias.weights.values[j] = 1.0;
}

void LstmCell::forward(const Tensor2& x, const LstmState& prev, LstmState& next, Cache* cache,
                       std::size_t step) const {
  const std::size_t h = hidden();
  const std::size_t rows = x.rows;
  if (x.cols != in()) {
    throw ConfigError("lstm '" + wx.name + "': input width " + std::to_string(x.cols) + " != " +
                      std::to_string(in()));
  }
  if (prev.rows() != rows || prev.hidden() != h) throw ConfigError("lstm '" + wx.name + "': state shape mismatch");
  if (!x.all_finite()) throw NumericError("lstm '" + wx.name + "': non-finite input at step " + std::to_string(step));

  Tensor2 gates;
  broadcast_bias(bias, rows, gates);
  if (rows > 0) {
    const auto& k = kernels::active();
    k.gemm_acc(x.data(), rows, in(), wx.weights.data(), 4 * h, gates.data());
    k.gemm_acc(prev.h.data(), rows, h, wh.weights.data(), 4 * h, gates.data());
  }

  LstmState out(rows, h);
  Tensor2 tanh_c(rows, h);
  for (std::size_t r = 0; r < rows; ++r) {
    double* z = gates.row(r).data();
    const double* c_prev = prev.c.row(r).data();
    double* c = out.c.row(r).data();
    double* hh = out.h.row(r).data();
    double* tc = tanh_c.row(r).data();
    for (std::size_t j = 0; j < h; ++j) {
      const double i_g = sigmoid(z[j]);
      const double f_g = sigmoid(z[h + j]);
      const double g_g = std::tanh(z[2 * h + j]);
      const double o_g = sigmoid(z[3 * h + j]);
      z[j] = i_g;
      z[h + j] = f_g;
      z[2 * h + j] = g_g;
      z[3 * h + j] = o_g;
      c[j] = f_g * c_prev[j] + i_g * g_g;
      tc[j] = std::tanh(c[j]);
      hh[j] = o_g * tc[j];
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->gates = std::move(gates);
    cache->c = out.c;
    cache->tanh_c = std::move(tanh_c);
  }
  next = std::move(out);
}

void LstmCell::backward(const Cache& cache, const Tensor2& dh, const Tensor2& dc, Tensor2* dx,
                        Tensor2& dh_prev, Tensor2& dc_prev) {
  const std::size_t h = hidden();
  const std::size_t rows = cache.x.rows;
  Tensor2 dz(rows, 4 * h);
  dc_prev = Tensor2(rows, h);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = cache.gates.row(r).data();
    const double* tc = cache.tanh_c.row(r).data();
    const double* cp = cache.c_prev.row(r).data();
    const double* dhr = dh.row(r).data();
    const double* dcr = dc.row(r).data();
    double* dzr = dz.row(r).data();
    double* dcp = dc_prev.row(r).data();
    for (std::size_t j = 0; j < h; ++j) {
      const double i_g = g[j], f_g = g[h + j], g_g = g[2 * h + j], o_g = g[3 * h + j];
      const double d_o = dhr[j] * tc[j];
      const double d_c = dcr[j] + dhr[j] * o_g * (1.0 - tc[j] * tc[j]);
      dzr[j] = d_c * g_g * i_g * (1.0 - i_g);
      dzr[h + j] = d_c * cp[j] * f_g * (1.0 - f_g);
      dzr[2 * h + j] = d_c * i_g * (1.0 - g_g * g_g);
      dzr[3 * h + j] = d_o * o_g * (1.0 - o_g);
      dcp[j] = d_c * f_g;
    }
  }
  dh_prev = Tensor2(rows, h);
  if (rows == 0) return;
  const auto& k = kernels::active();
  k.gemm_tn_acc(cache.x.data(), rows, in(), dz.data(), 4 * h, wx.grads.data());
  k.gemm_tn_acc(cache.h_prev.data(), rows, h, dz.data(), 4 * h, wh.grads.data());
  accumulate_bias_grad(dz, bias);
  if (dx != nullptr) k.gemm_nt_acc(dz.data(), rows, 4 * h, wx.weights.data(), in(), dx->data());
  k.gemm_nt_acc(dz.data(), rows, 4 * h, wh.weights.data(), h, dh_prev.data());
}

}  // namespace macrpo::nn
