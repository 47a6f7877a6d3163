#pragma once

// Simple feed-forward (SFF) probabilistic forecaster: an MLP maps a
// normalized context window to H Gaussian (mu, sigma) pairs in one pass and
// is trained by minimizing the Gaussian negative log-likelihood.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ntnfc/error.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/nn.hpp"
#include "ntnfc/normal.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/timeseries.hpp"

namespace ntnfc {

/// Added to softplus(raw) so sigma never reaches zero (normalized units).
inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kClipNorm = 10.0;
inline constexpr const char* kNormalizationTag = "per_window_zscore";

inline double gaussian_nll(double mu, double sigma, double y) {
  if (!(sigma > 0.0)) throw Error(Errc::NonPositiveSigma, "sigma must be positive");
  const double r = (y - mu) / sigma;
  return 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) + 0.5 * r * r;
}

struct SFFHyper {
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden_dims{64, 64};
};

struct SFFModel {
  nn::MLPConfig config;
  nn::ParamStore params;
  std::size_t context_len = 0;
  std::size_t horizon = 0;
  std::string normalization = kNormalizationTag;
  SFFHyper hyper;
  std::vector<double> training_log;  // mean NLL per epoch
};

/// A window already scaled by its own context statistics.
struct NormalizedWindow {
  std::vector<double> input;
  std::vector<double> target;
};

inline NormalizedWindow normalize_window(const ForecastWindow& w) {
  const auto st = norm_stats(w.context);
  return {apply_norm(w.context, st), apply_norm(w.horizon_truth, st)};
}

/// Mean NLL over the horizon for one network output (first H entries are
/// means, last H raw sigmas). If `grad_out` is non-null it receives
/// d(loss)/d(output).
inline double sff_output_loss(std::span<const double> out, std::span<const double> target,
                              std::vector<double>* grad_out) {
  const std::size_t H = target.size();
  if (out.size() != 2 * H) throw Error(Errc::ShapeMismatch, "SFF head must emit 2H values");
  if (grad_out) grad_out->assign(2 * H, 0.0);
  const double invH = 1.0 / static_cast<double>(H);
  double loss = 0.0;
  for (std::size_t t = 0; t < H; ++t) {
    const double mu = out[t];
    const double raw = out[H + t];
    const double sigma = nn::softplus(raw) + kSigmaFloor;
    loss += gaussian_nll(mu, sigma, target[t]);
    if (grad_out) {
      const double diff = mu - target[t];
      const double s2 = sigma * sigma;
      (*grad_out)[t] = diff / s2 * invH;
      const double dsigma = 1.0 / sigma - diff * diff / (s2 * sigma);
      (*grad_out)[H + t] = dsigma * nn::sigmoid(raw) * invH;
    }
  }
  return loss * invH;
}

/// Mean loss over a batch of normalized windows.
inline double sff_batch_loss(const nn::ParamStore& params, std::span<const NormalizedWindow> batch) {
  nn::MLPCache cache;
  double total = 0.0;
  for (const auto& w : batch) total += sff_output_loss(nn::mlp_forward(params, w.input, cache), w.target, nullptr);
  return total / static_cast<double>(batch.size());
}

/// Gradient of sff_batch_loss, accumulated into `grads` (which must be zeroed
/// by the caller). Returns the batch loss.
inline double sff_batch_gradient(const nn::ParamStore& params, std::span<const NormalizedWindow* const> batch,
                                 nn::ParamStore& grads, nn::MLPCache& cache) {
  std::vector<double> g;
  double total = 0.0;
  const double invB = 1.0 / static_cast<double>(batch.size());
  for (const auto* w : batch) {
    const auto out = nn::mlp_forward(params, w->input, cache);
    total += sff_output_loss(out, w->target, &g);
    for (double& v : g) v *= invB;
    nn::mlp_backward(params, cache, g, grads);
  }
  return total * invB;
}

inline nn::ParamStore sff_batch_gradient(const nn::ParamStore& params, std::span<const NormalizedWindow> batch) {
  std::vector<const NormalizedWindow*> ptrs;
  for (const auto& w : batch) ptrs.push_back(&w);
  nn::ParamStore grads = params.zeros_like();
  nn::MLPCache cache;
  sff_batch_gradient(params, ptrs, grads, cache);
  return grads;
}

namespace detail {

inline void check_windows(std::span<const ForecastWindow> windows, std::size_t horizon) {
  if (windows.empty()) throw Error(Errc::EmptyTrainingSet, "no training windows");
  if (horizon == 0) throw Error(Errc::InvalidConfig, "horizon must be positive");
  const std::size_t C = windows.front().context.size();
  if (C == 0) throw Error(Errc::ShapeMismatch, "empty context");
  for (const auto& w : windows)
    if (w.context.size() != C || w.horizon_truth.size() != horizon)
      throw Error(Errc::ShapeMismatch, "windows must share context length " + std::to_string(C) +
                                           " and horizon " + std::to_string(horizon));
}

inline void check_batching(std::size_t batch_size, double lr, double weight_decay) {
  if (batch_size == 0) throw Error(Errc::InvalidConfig, "batch_size must be positive");
  if (!(lr > 0.0)) throw Error(Errc::InvalidConfig, "lr must be positive");
  if (!(weight_decay >= 0.0)) throw Error(Errc::InvalidConfig, "weight_decay must be >= 0");
}

}  // namespace detail

inline SFFModel train_sff(std::span<const ForecastWindow> windows, const SFFHyper& hyper, std::size_t horizon) {
  detail::check_windows(windows, horizon);
  detail::check_batching(hyper.batch_size, hyper.lr, hyper.weight_decay);

  SFFModel model;
  model.context_len = windows.front().context.size();
  model.horizon = horizon;
  model.hyper = hyper;
  model.config = {model.context_len, hyper.hidden_dims, 2 * horizon, nn::Activation::relu};
  model.params = nn::init_params(model.config, hyper.seed);

  std::vector<NormalizedWindow> data;
  data.reserve(windows.size());
  for (const auto& w : windows) data.push_back(normalize_window(w));

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(hyper.seed, "sff-shuffle"));
  nn::AdamState adam(model.params, {.lr = hyper.lr, .weight_decay = hyper.weight_decay});
  nn::ParamStore grads = model.params.zeros_like();
  nn::MLPCache cache;
  std::vector<const NormalizedWindow*> batch;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(&data[order[k]]);
      grads.fill(0.0);
      const double loss = sff_batch_gradient(model.params, batch, grads, cache);
      epoch_loss += loss * static_cast<double>(stop - start);
      nn::clip_global_norm(grads, kClipNorm);
      nn::adam_step(model.params, grads, adam);
    }
    model.training_log.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return model;
}

inline GaussianForecast predict_sff(const SFFModel& model, std::span<const double> context,
                                    std::string beam_id = {}, EpochHour origin_time = 0) {
  if (context.size() != model.context_len)
    throw Error(Errc::ShapeMismatch, "context has " + std::to_string(context.size()) + " values, model expects " +
                                         std::to_string(model.context_len));
  for (double v : context)
    if (!std::isfinite(v)) throw Error(Errc::ShapeMismatch, "context contains non-finite values");
  const auto [x, st] = normalize(context);
  const auto out = nn::mlp_forward(model.params, x);
  const std::size_t H = model.horizon;
  GaussianForecast f{std::move(beam_id), origin_time, std::vector<double>(H), std::vector<double>(H)};
  for (std::size_t t = 0; t < H; ++t) {
    f.mu[t] = out[t] * st.std + st.mean;
    f.sigma[t] = (nn::softplus(out[H + t]) + kSigmaFloor) * st.std;
  }
  return f;
}

inline std::vector<double> quantile_closed_form(const GaussianForecast& f, double p) {
  const double z = inverse_normal_cdf(p);
  std::vector<double> q(f.horizon());
  for (std::size_t t = 0; t < q.size(); ++t) q[t] = p == 0.5 ? f.mu[t] : f.mu[t] + z * f.sigma[t];
  return q;
}

/// Seed for per-beam streams, independent of processing order.
inline std::uint64_t beam_seed(std::uint64_t seed, std::string_view beam_id) { return seed ^ fnv1a(beam_id); }

inline SamplePaths sample_paths(const GaussianForecast& f, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::InvalidConfig, "need at least one sample path");
  const std::size_t H = f.horizon();
  SamplePaths paths{n, H, std::vector<double>(n * H), seed};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < H; ++t) paths.values[i * H + t] = f.mu[t] + f.sigma[t] * rng.normal();
  return paths;
}

}  // namespace ntnfc
