#pragma once

// A deliberately small neural toolkit: dense ReLU networks, a single-layer
// LSTM with backpropagation through time, Adam, global-norm clipping and a
// central-difference gradient checker. Double precision throughout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntnfc/error.hpp"
#include "ntnfc/rng.hpp"

namespace ntnfc::nn {

/// A named row-major matrix (a bias is a rows x 1 matrix).
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

class ParamStore {
 public:
  Tensor& add(std::string name, std::size_t rows, std::size_t cols) {
    tensors_.push_back({std::move(name), rows, cols, std::vector<double>(rows * cols, 0.0)});
    return tensors_.back();
  }

  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }

  const Tensor& at(std::string_view name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return t;
    throw Error(Errc::ShapeMismatch, "no parameter named '" + std::string(name) + "'");
  }
  Tensor& at(std::string_view name) {
    return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).at(name));
  }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  /// Same names and shapes, all entries zero.
  ParamStore zeros_like() const {
    ParamStore z;
    for (const auto& t : tensors_) z.add(t.name, t.rows, t.cols);
    return z;
  }

  void fill(double v) {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), v);
  }

  bool same_shape(const ParamStore& o) const noexcept {
    if (o.tensors_.size() != tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      if (o.tensors_[i].name != tensors_[i].name || o.tensors_[i].rows != tensors_[i].rows ||
          o.tensors_[i].cols != tensors_[i].cols)
        return false;
    return true;
  }

  void scale(double k) {
    for (auto& t : tensors_)
      for (double& v : t.data) v *= k;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& t : tensors_)
      for (double v : t.data) s += v * v;
    return s;
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
  }

  /// Flat coordinate access across all tensors, in declaration order.
  double& flat(std::size_t i) {
    for (auto& t : tensors_) {
      if (i < t.size()) return t.data[i];
      i -= t.size();
    }
    throw Error(Errc::ShapeMismatch, "flat index out of range");
  }

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<Tensor> tensors_;
};

inline void require_same_shape(const ParamStore& a, const ParamStore& b, const char* what) {
  if (!a.same_shape(b)) throw Error(Errc::ShapeMismatch, std::string(what) + ": parameter shapes differ");
}

// ---------------------------------------------------------------------------
// Kernels

/// Dot product with four independent accumulators (fixed order, so results
/// are reproducible, but the compiler can pipeline the adds).
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y = W x + b
inline void affine(const Tensor& W, const Tensor& b, const double* x, double* y) {
  for (std::size_t r = 0; r < W.rows; ++r) y[r] = b.data[r] + dot(&W.data[r * W.cols], x, W.cols);
}

// dW += g x^T
inline void add_outer(Tensor& dW, const double* g, const double* x) {
  for (std::size_t r = 0; r < dW.rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* row = &dW.data[r * dW.cols];
    for (std::size_t c = 0; c < dW.cols; ++c) row[c] += gr * x[c];
  }
}

// out = W^T g
inline void transpose_times(const Tensor& W, const double* g, double* out) {
  std::fill(out, out + W.cols, 0.0);
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = &W.data[r * W.cols];
    for (std::size_t c = 0; c < W.cols; ++c) out[c] += gr * row[c];
  }
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline void glorot_uniform(Tensor& W, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(W.rows + W.cols));
  for (double& w : W.data) w = rng.uniform(-a, a);
}

// ---------------------------------------------------------------------------
// Dense ReLU network

enum class Activation { relu };

struct MLPConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation activation = Activation::relu;

  friend bool operator==(const MLPConfig&, const MLPConfig&) = default;
};

inline void validate(const MLPConfig& c) {
  if (c.input_dim < 1 || c.output_dim < 1) throw Error(Errc::InvalidConfig, "MLP dims must be >= 1");
  for (auto h : c.hidden_dims)
    if (h < 1) throw Error(Errc::InvalidConfig, "MLP hidden dims must be >= 1");
}

/// Layer l has "W{l}" (out x in) and "b{l}" (out x 1); the last layer is linear.
inline ParamStore init_params(const MLPConfig& c, std::uint64_t seed) {
  validate(c);
  Rng rng(seed);
  ParamStore p;
  std::size_t in = c.input_dim;
  const std::size_t layers = c.hidden_dims.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = l + 1 < layers ? c.hidden_dims[l] : c.output_dim;
    glorot_uniform(p.add("W" + std::to_string(l), out, in), rng);
    p.add("b" + std::to_string(l), out, 1);
    in = out;
  }
  return p;
}

struct MLPCache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
};

inline std::size_t mlp_layers(const ParamStore& p) { return p.tensors().size() / 2; }

inline std::vector<double> mlp_forward(const ParamStore& p, std::span<const double> x, MLPCache& cache) {
  const std::size_t L = mlp_layers(p);
  if (L == 0 || x.size() != p[0].cols)
    throw Error(Errc::ShapeMismatch, "MLP input has " + std::to_string(x.size()) + " entries, expected " +
                                         std::to_string(L ? p[0].cols : 0));
  cache.inputs.resize(L);
  cache.pre.resize(L);
  cache.inputs[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const Tensor& W = p[2 * l];
    auto& z = cache.pre[l];
    z.resize(W.rows);
    affine(W, p[2 * l + 1], cache.inputs[l].data(), z.data());
    if (l + 1 < L) {
      auto& a = cache.inputs[l + 1];
      a.resize(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
  }
  return cache.pre[L - 1];
}

inline std::vector<double> mlp_forward(const ParamStore& p, std::span<const double> x) {
  MLPCache cache;
  return mlp_forward(p, x, cache);
}

/// Accumulates d<grad_y, y>/d(params) into `grads`.
inline void mlp_backward(const ParamStore& p, const MLPCache& cache, std::span<const double> grad_y,
                         ParamStore& grads) {
  const std::size_t L = mlp_layers(p);
  if (cache.pre.size() != L || grad_y.size() != cache.pre[L - 1].size())
    throw Error(Errc::ShapeMismatch, "MLP backward: gradient does not match the forward cache");
  std::vector<double> g(grad_y.begin(), grad_y.end()), prev;
  for (std::size_t l = L; l-- > 0;) {
    const Tensor& W = p[2 * l];
    add_outer(grads[2 * l], g.data(), cache.inputs[l].data());
    auto& db = grads[2 * l + 1].data;
    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
    if (l == 0) break;
    prev.resize(W.cols);
    transpose_times(W, g.data(), prev.data());
    const auto& z = cache.pre[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (z[i] <= 0.0) prev[i] = 0.0;
    g.swap(prev);
  }
}

inline ParamStore mlp_backward(const ParamStore& p, const MLPCache& cache, std::span<const double> grad_y) {
  ParamStore grads = p.zeros_like();
  mlp_backward(p, cache, grad_y, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// LSTM

struct LSTMConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;
  std::size_t output_dim = 1;

  friend bool operator==(const LSTMConfig&, const LSTMConfig&) = default;
};

inline void validate(const LSTMConfig& c) {
  if (c.input_dim < 1 || c.hidden_dim < 1 || c.output_dim < 1)
    throw Error(Errc::InvalidConfig, "LSTM dims must be >= 1");
}

// Gate blocks inside the stacked 4H rows: input, forget, candidate, output.
enum LstmGate : std::size_t { kGateI = 0, kGateF = 1, kGateG = 2, kGateO = 3 };

/// Tensors: W_x (4H x in), W_h (4H x H), b (4H), W_out (out x H), b_out (out).
/// Forget-gate bias starts at 1.
inline ParamStore init_params(const LSTMConfig& c, std::uint64_t seed) {
  validate(c);
  Rng rng(seed);
  const std::size_t H = c.hidden_dim;
  ParamStore p;
  glorot_uniform(p.add("W_x", 4 * H, c.input_dim), rng);
  glorot_uniform(p.add("W_h", 4 * H, H), rng);
  auto& b = p.add("b", 4 * H, 1);
  for (std::size_t j = 0; j < H; ++j) b.data[kGateF * H + j] = 1.0;
  glorot_uniform(p.add("W_out", c.output_dim, H), rng);
  p.add("b_out", c.output_dim, 1);
  return p;
}

struct LSTMCache {
  std::size_t hidden = 0;
  std::vector<std::vector<double>> x;      // inputs, T entries
  std::vector<std::vector<double>> gates;  // activated i,f,g,o stacked, T entries
  std::vector<std::vector<double>> c;      // cell states c_0..c_T
  std::vector<std::vector<double>> h;      // hidden states h_0..h_T
};

struct LSTMOutput {
  std::vector<std::vector<double>> hidden_states;  // h_1..h_T
  std::vector<double> output;                      // W_out h_T + b_out
};

namespace detail {
enum : std::size_t { kWx = 0, kWh = 1, kB = 2, kWout = 3, kBout = 4 };
}

inline std::vector<double> lstm_forward(const ParamStore& p, std::span<const std::vector<double>> seq,
                                        LSTMCache& cache) {
  using namespace detail;
  if (seq.empty()) throw Error(Errc::EmptySequence, "LSTM needs at least one step");
  const Tensor& Wx = p[kWx];
  const Tensor& Wh = p[kWh];
  const Tensor& b = p[kB];
  const std::size_t H = Wh.cols;
  const std::size_t T = seq.size();
  cache.hidden = H;
  cache.x.assign(seq.begin(), seq.end());
  cache.gates.resize(T);
  cache.c.assign(T + 1, std::vector<double>(H, 0.0));
  cache.h.assign(T + 1, std::vector<double>(H, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    const auto& xt = seq[t];
    if (xt.size() != Wx.cols)
      throw Error(Errc::ShapeMismatch, "LSTM step " + std::to_string(t) + " has " + std::to_string(xt.size()) +
                                           " inputs, expected " + std::to_string(Wx.cols));
    auto& z = cache.gates[t];
    z.resize(4 * H);
    const auto& hprev = cache.h[t];
    for (std::size_t r = 0; r < 4 * H; ++r)
      z[r] = b.data[r] + dot(&Wx.data[r * Wx.cols], xt.data(), Wx.cols) + dot(&Wh.data[r * H], hprev.data(), H);
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigmoid(z[kGateI * H + j]);
      const double f = sigmoid(z[kGateF * H + j]);
      const double g = std::tanh(z[kGateG * H + j]);
      const double o = sigmoid(z[kGateO * H + j]);
      z[kGateI * H + j] = i;
      z[kGateF * H + j] = f;
      z[kGateG * H + j] = g;
      z[kGateO * H + j] = o;
      const double c = f * cache.c[t][j] + i * g;
      cache.c[t + 1][j] = c;
      cache.h[t + 1][j] = o * std::tanh(c);
    }
  }
  std::vector<double> y(p[kWout].rows);
  affine(p[kWout], p[kBout], cache.h[T].data(), y.data());
  return y;
}

inline LSTMOutput lstm_forward(const ParamStore& p, std::span<const std::vector<double>> seq) {
  LSTMCache cache;
  LSTMOutput out;
  out.output = lstm_forward(p, seq, cache);
  out.hidden_states.assign(cache.h.begin() + 1, cache.h.end());
  return out;
}

/// Accumulates d<grad_out, output>/d(params) into `grads`, through all steps.
inline void lstm_backward(const ParamStore& p, const LSTMCache& cache, std::span<const double> grad_out,
                          ParamStore& grads) {
  using namespace detail;
  const std::size_t H = cache.hidden;
  const std::size_t T = cache.x.size();
  if (T == 0 || grad_out.size() != p[kWout].rows)
    throw Error(Errc::ShapeMismatch, "LSTM backward: gradient does not match the forward cache");
  add_outer(grads[kWout], grad_out.data(), cache.h[T].data());
  for (std::size_t i = 0; i < grad_out.size(); ++i) grads[kBout].data[i] += grad_out[i];

  std::vector<double> dh(H), dc(H, 0.0), dz(4 * H), dh_prev(H);
  transpose_times(p[kWout], grad_out.data(), dh.data());
  for (std::size_t t = T; t-- > 0;) {
    const auto& gt = cache.gates[t];
    const auto& c = cache.c[t + 1];
    const auto& c_prev = cache.c[t];
    for (std::size_t j = 0; j < H; ++j) {
      const double i = gt[kGateI * H + j], f = gt[kGateF * H + j];
      const double g = gt[kGateG * H + j], o = gt[kGateO * H + j];
      const double tc = std::tanh(c[j]);
      const double d_o = dh[j] * tc;
      dc[j] += dh[j] * o * (1.0 - tc * tc);
      dz[kGateI * H + j] = dc[j] * g * i * (1.0 - i);
      dz[kGateF * H + j] = dc[j] * c_prev[j] * f * (1.0 - f);
      dz[kGateG * H + j] = dc[j] * i * (1.0 - g * g);
      dz[kGateO * H + j] = d_o * o * (1.0 - o);
      dc[j] *= f;
    }
    add_outer(grads[kWx], dz.data(), cache.x[t].data());
    add_outer(grads[kWh], dz.data(), cache.h[t].data());
    auto& db = grads[kB].data;
    for (std::size_t r = 0; r < 4 * H; ++r) db[r] += dz[r];
    if (t == 0) break;
    transpose_times(p[kWh], dz.data(), dh_prev.data());
    dh.swap(dh_prev);
  }
}

inline ParamStore lstm_backward(const ParamStore& p, const LSTMCache& cache, std::span<const double> grad_out) {
  ParamStore grads = p.zeros_like();
  lstm_backward(p, cache, grad_out, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Optimization

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style) decay, applied to weight matrices ("W*") only.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamHyper hyper;
  ParamStore m;
  ParamStore v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(const ParamStore& params, AdamHyper h) : hyper(h), m(params.zeros_like()), v(params.zeros_like()) {}
};

inline void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
  require_same_shape(params, grads, "adam_step");
  require_same_shape(params, state.m, "adam_step");
  require_same_shape(params, state.v, "adam_step");
  const auto& h = state.hyper;
  ++state.t;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.tensors().size(); ++k) {
    auto& w = params[k].data;
    const auto& g = grads[k].data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    const double decay = params[k].name.starts_with('W') ? h.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= h.lr * (mhat / (std::sqrt(vhat) + h.eps) + decay * w[i]);
    }
  }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
inline double clip_global_norm(ParamStore& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
  return norm;
}

// ---------------------------------------------------------------------------
// Gradient checking

using LossFn = std::function<double(const ParamStore&)>;
using GradFn = std::function<ParamStore(const ParamStore&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares `grad` against central differences of `loss`, coordinate by
/// coordinate.
inline GradCheckResult grad_check(const LossFn& loss, const GradFn& grad, const ParamStore& params,
                                  double eps = 1e-5) {
  const ParamStore analytic = grad(params);
  require_same_shape(params, analytic, "grad_check");
  GradCheckResult res;
  ParamStore probe = params;
  std::size_t idx = 0;
  for (std::size_t k = 0; k < probe.tensors().size(); ++k) {
    auto& data = probe[k].data;
    for (std::size_t i = 0; i < data.size(); ++i, ++idx) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = loss(probe);
      data[i] = saved - eps;
      const double down = loss(probe);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[k].data[i], numeric);
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_index = idx;
      }
    }
  }
  res.coordinates = idx;
  return res;
}

}  // namespace ntnfc::nn
