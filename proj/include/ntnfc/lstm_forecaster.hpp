#pragma once

// Deterministic baseline: a single-layer LSTM reads the normalized context
// one hour at a time and an affine head on the final hidden state emits all
// H normalized predictions. Trained with mean squared error.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntnfc/error.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/nn.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/timeseries.hpp"

namespace ntnfc {

inline double mse_loss(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw Error(Errc::ShapeMismatch, "mse_loss needs equal, non-empty lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

struct LSTMHyper {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 64;
};

struct LSTMModel {
  nn::LSTMConfig config;
  nn::ParamStore params;
  std::size_t context_len = 0;
  std::size_t horizon = 0;
  std::string normalization = kNormalizationTag;
  LSTMHyper hyper;
  std::vector<double> training_log;  // mean MSE (normalized units) per epoch
};

/// Scalar series -> sequence of 1-vectors.
inline std::vector<std::vector<double>> as_sequence(std::span<const double> x) {
  std::vector<std::vector<double>> seq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) seq[i] = {x[i]};
  return seq;
}

struct NormalizedSequence {
  std::vector<std::vector<double>> input;
  std::vector<double> target;
};

inline double lstm_batch_loss(const nn::ParamStore& params, std::span<const NormalizedSequence> batch) {
  nn::LSTMCache cache;
  double total = 0.0;
  for (const auto& w : batch) total += mse_loss(nn::lstm_forward(params, w.input, cache), w.target);
  return total / static_cast<double>(batch.size());
}

inline double lstm_batch_gradient(const nn::ParamStore& params, std::span<const NormalizedSequence* const> batch,
                                  nn::ParamStore& grads, nn::LSTMCache& cache) {
  double total = 0.0;
  const double invB = 1.0 / static_cast<double>(batch.size());
  std::vector<double> g;
  for (const auto* w : batch) {
    const auto y = nn::lstm_forward(params, w->input, cache);
    total += mse_loss(y, w->target);
    g.resize(y.size());
    const double k = 2.0 / static_cast<double>(y.size()) * invB;
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = k * (y[i] - w->target[i]);
    nn::lstm_backward(params, cache, g, grads);
  }
  return total * invB;
}

inline nn::ParamStore lstm_batch_gradient(const nn::ParamStore& params, std::span<const NormalizedSequence> batch) {
  std::vector<const NormalizedSequence*> ptrs;
  for (const auto& w : batch) ptrs.push_back(&w);
  nn::ParamStore grads = params.zeros_like();
  nn::LSTMCache cache;
  lstm_batch_gradient(params, ptrs, grads, cache);
  return grads;
}

inline LSTMModel train_lstm(std::span<const ForecastWindow> windows, const LSTMHyper& hyper, std::size_t horizon) {
  detail::check_windows(windows, horizon);
  detail::check_batching(hyper.batch_size, hyper.lr, hyper.weight_decay);

  LSTMModel model;
  model.context_len = windows.front().context.size();
  model.horizon = horizon;
  model.hyper = hyper;
  model.config = {1, hyper.hidden_dim, horizon};
  model.params = nn::init_params(model.config, hyper.seed);

  std::vector<NormalizedSequence> data;
  data.reserve(windows.size());
  for (const auto& w : windows) {
    auto nw = normalize_window(w);
    data.push_back({as_sequence(nw.input), std::move(nw.target)});
  }

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(hyper.seed, "lstm-shuffle"));
  nn::AdamState adam(model.params, {.lr = hyper.lr, .weight_decay = hyper.weight_decay});
  nn::ParamStore grads = model.params.zeros_like();
  nn::LSTMCache cache;
  std::vector<const NormalizedSequence*> batch;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(&data[order[k]]);
      grads.fill(0.0);
      const double loss = lstm_batch_gradient(model.params, batch, grads, cache);
      epoch_loss += loss * static_cast<double>(stop - start);
      nn::clip_global_norm(grads, kClipNorm);
      nn::adam_step(model.params, grads, adam);
    }
    model.training_log.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return model;
}

inline PointForecast predict_lstm(const LSTMModel& model, std::span<const double> context,
                                  std::string beam_id = {}, EpochHour origin_time = 0) {
  if (context.size() != model.context_len)
    throw Error(Errc::ShapeMismatch, "context has " + std::to_string(context.size()) + " values, model expects " +
                                         std::to_string(model.context_len));
  for (double v : context)
    if (!std::isfinite(v)) throw Error(Errc::ShapeMismatch, "context contains non-finite values");
  const auto [x, st] = normalize(context);
  const auto y = nn::lstm_forward(model.params, as_sequence(x)).output;
  return {std::move(beam_id), origin_time, denormalize(y, st)};
}

}  // namespace ntnfc
