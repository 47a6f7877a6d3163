#pragma once

// Gradient verification on small random problems: the MLP with the
// Gaussian NLL head and the LSTM with the MSE head, both checked against
// central differences.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ntnfc/lstm_forecaster.hpp"
#include "ntnfc/nn.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/sff.hpp"

namespace ntnfc {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEps = 1e-5;

struct GradCheckReport {
  std::string model;
  nn::GradCheckResult result;
  bool passed() const { return result.max_rel_error <= kGradCheckTolerance; }
};

namespace detail {

// ReLU has a kink at 0; finite differences straddling it are meaningless, so
// toy instances whose pre-activations sit that close to 0 are redrawn.
inline bool clear_of_kinks(const nn::ParamStore& p, std::span<const NormalizedWindow> batch, double margin) {
  nn::MLPCache cache;
  for (const auto& w : batch) {
    nn::mlp_forward(p, w.input, cache);
    for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l)
      for (double z : cache.pre[l])
        if (std::abs(z) < margin) return false;
  }
  return true;
}

}  // namespace detail

inline GradCheckReport gradcheck_sff(std::uint64_t seed, double eps = kGradCheckEps) {
  const std::size_t C = 6, H = 3, B = 4;
  Rng rng(derive_seed(seed, "gradcheck-sff"));
  for (std::uint64_t attempt = 0;; ++attempt) {
    const nn::MLPConfig cfg{C, {5, 4}, 2 * H, nn::Activation::relu};
    auto params = nn::init_params(cfg, derive_seed(seed, attempt));
    for (std::size_t k = 0; k < params.tensors().size(); ++k)
      for (double& v : params[k].data) v += 0.1 * rng.normal();
    std::vector<NormalizedWindow> batch(B);
    for (auto& w : batch) {
      for (std::size_t i = 0; i < C; ++i) w.input.push_back(rng.normal());
      for (std::size_t i = 0; i < H; ++i) w.target.push_back(rng.normal());
    }
    if (!detail::clear_of_kinks(params, batch, 100 * eps)) continue;
    const auto res = nn::grad_check([&](const nn::ParamStore& p) { return sff_batch_loss(p, batch); },
                                    [&](const nn::ParamStore& p) { return sff_batch_gradient(p, batch); }, params, eps);
    return {"sff", res};
  }
}

inline GradCheckReport gradcheck_lstm(std::uint64_t seed, double eps = kGradCheckEps) {
  const std::size_t T = 7, Hd = 4, out = 3, B = 3;
  Rng rng(derive_seed(seed, "gradcheck-lstm"));
  auto params = nn::init_params(nn::LSTMConfig{1, Hd, out}, derive_seed(seed, 0));
  for (std::size_t k = 0; k < params.tensors().size(); ++k)
    for (double& v : params[k].data) v += 0.1 * rng.normal();
  std::vector<NormalizedSequence> batch(B);
  for (auto& s : batch) {
    for (std::size_t t = 0; t < T; ++t) s.input.push_back({rng.normal()});
    for (std::size_t i = 0; i < out; ++i) s.target.push_back(rng.normal());
  }
  const auto res = nn::grad_check([&](const nn::ParamStore& p) { return lstm_batch_loss(p, batch); },
                                  [&](const nn::ParamStore& p) { return lstm_batch_gradient(p, batch); }, params, eps);
  return {"lstm", res};
}

inline std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed = 0) {
  return {gradcheck_sff(seed), gradcheck_lstm(seed)};
}

}  // namespace ntnfc
