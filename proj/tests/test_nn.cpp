#include <gtest/gtest.h>

#include <cmath>

#include "ntnfc/nn.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/verify.hpp"

using namespace ntnfc;
using namespace ntnfc::nn;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

void perturb(ParamStore& p, Rng& rng, double scale) {
  for (auto& t : p.tensors())
    for (double& v : t.data) v += scale * rng.normal();
}

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Kernels, DotMatchesNaiveSum) {
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u}) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    EXPECT_NEAR(dot(a.data(), b.data(), n), inner(a, b), 1e-12);
  }
}

TEST(Kernels, Softplus) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(50.0), 50.0, 1e-12);
  EXPECT_GT(softplus(-50.0), 0.0);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
}

TEST(Init, DeterministicInSeed) {
  const MLPConfig c{10, {8, 6}, 4, Activation::relu};
  EXPECT_EQ(init_params(c, 9), init_params(c, 9));
  EXPECT_NE(init_params(c, 9), init_params(c, 10));
  const LSTMConfig l{1, 5, 3};
  EXPECT_EQ(init_params(l, 9), init_params(l, 9));
}

TEST(Init, MlpBiasesZeroAndWeightsBounded) {
  const auto p = init_params(MLPConfig{10, {8, 6}, 4, Activation::relu}, 3);
  ASSERT_EQ(p.tensors().size(), 6u);
  for (const auto& t : p.tensors()) {
    if (t.name[0] == 'b') {
      for (double v : t.data) EXPECT_EQ(v, 0.0);
    } else {
      const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
      for (double v : t.data) EXPECT_LE(std::abs(v), a);
    }
  }
  EXPECT_EQ(p.at("W0").rows, 8u);
  EXPECT_EQ(p.at("W0").cols, 10u);
  EXPECT_EQ(p.at("W2").rows, 4u);
}

TEST(Init, LstmForgetBiasIsOne) {
  const std::size_t H = 5;
  const auto p = init_params(LSTMConfig{1, H, 3}, 3);
  const auto& b = p.at("b");
  for (std::size_t j = 0; j < 4 * H; ++j) EXPECT_EQ(b.data[j], (j >= H && j < 2 * H) ? 1.0 : 0.0);
  for (double v : p.at("b_out").data) EXPECT_EQ(v, 0.0);
  for (const char* name : {"W_x", "W_h", "W_out"}) {
    const auto& t = p.at(name);
    const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
    for (double v : t.data) EXPECT_LE(std::abs(v), a);
  }
}

TEST(Init, InvalidConfig) {
  EXPECT_THROW(init_params(MLPConfig{0, {}, 1, Activation::relu}, 0), Error);
  EXPECT_THROW(init_params(MLPConfig{1, {0}, 1, Activation::relu}, 0), Error);
  EXPECT_THROW(init_params(LSTMConfig{1, 0, 1}, 0), Error);
}

TEST(Mlp, ZeroNetOutputsZero) {
  auto p = init_params(MLPConfig{3, {4}, 2, Activation::relu}, 0);
  p.fill(0.0);
  EXPECT_EQ(mlp_forward(p, std::vector<double>{1, 2, 3}), (std::vector<double>{0, 0}));
}

TEST(Mlp, ZeroWeightsOutputBias) {
  auto p = init_params(MLPConfig{3, {4}, 2, Activation::relu}, 0);
  p.fill(0.0);
  p.at("b1").data = {1.5, -2.0};
  EXPECT_EQ(mlp_forward(p, std::vector<double>{1, 2, 3}), (std::vector<double>{1.5, -2.0}));
}

TEST(Mlp, ReluKillsNegative) {
  auto p = init_params(MLPConfig{1, {1}, 1, Activation::relu}, 0);
  p.at("W0").data = {1};
  p.at("W1").data = {1};
  p.at("b0").data = {0};
  p.at("b1").data = {0};
  EXPECT_EQ(mlp_forward(p, std::vector<double>{-3}), (std::vector<double>{0}));
  EXPECT_EQ(mlp_forward(p, std::vector<double>{3}), (std::vector<double>{3}));
}

TEST(Mlp, HandComputedTwoLayer) {
  auto p = init_params(MLPConfig{2, {2}, 1, Activation::relu}, 0);
  p.at("W0").data = {1, -1, 0.5, 2};  // rows: [1,-1], [0.5,2]
  p.at("b0").data = {0.1, -0.2};
  p.at("W1").data = {3, -1};
  p.at("b1").data = {0.25};
  // x = [2, 1]: pre0 = [1.1, 2.8] -> relu same; y = 3.3 - 2.8 + 0.25 = 0.75
  EXPECT_NEAR(mlp_forward(p, std::vector<double>{2, 1})[0], 0.75, 1e-15);
  // x = [0, 1]: pre0 = [-0.9, 1.8] -> [0, 1.8]; y = -1.8 + 0.25
  EXPECT_NEAR(mlp_forward(p, std::vector<double>{0, 1})[0], -1.55, 1e-15);
}

TEST(Mlp, ShapeMismatch) {
  const auto p = init_params(MLPConfig{3, {4}, 2, Activation::relu}, 0);
  EXPECT_THROW(mlp_forward(p, std::vector<double>{1, 2}), Error);
  MLPCache cache;
  mlp_forward(p, std::vector<double>{1, 2, 3}, cache);
  EXPECT_THROW(mlp_backward(p, cache, std::vector<double>{1}), Error);
}

TEST(Mlp, ZeroUpstreamGradientGivesZero) {
  const auto p = init_params(MLPConfig{3, {4, 3}, 2, Activation::relu}, 2);
  MLPCache cache;
  mlp_forward(p, std::vector<double>{1, -2, 3}, cache);
  const auto g = mlp_backward(p, cache, std::vector<double>{0, 0});
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(Mlp, SingleLinearLayerClosedForm) {
  auto p = init_params(MLPConfig{3, {}, 2, Activation::relu}, 4);
  const std::vector<double> x{1, -2, 0.5}, gy{0.3, -0.7};
  MLPCache cache;
  const auto y = mlp_forward(p, x, cache);
  for (std::size_t r = 0; r < 2; ++r)
    EXPECT_NEAR(y[r], p.at("W0")(r, 0) * x[0] + p.at("W0")(r, 1) * x[1] + p.at("W0")(r, 2) * x[2], 1e-15);
  const auto g = mlp_backward(p, cache, gy);
  EXPECT_EQ(g.at("b0").data, gy);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(g.at("W0")(r, c), gy[r] * x[c]);
}

TEST(Mlp, BackwardAccumulates) {
  const auto p = init_params(MLPConfig{2, {3}, 1, Activation::relu}, 5);
  MLPCache cache;
  mlp_forward(p, std::vector<double>{0.4, -1}, cache);
  const std::vector<double> gy{1.0};
  auto once = mlp_backward(p, cache, gy);
  auto twice = p.zeros_like();
  mlp_backward(p, cache, gy, twice);
  mlp_backward(p, cache, gy, twice);
  once.scale(2.0);
  for (std::size_t k = 0; k < once.tensors().size(); ++k)
    for (std::size_t i = 0; i < once[k].size(); ++i) EXPECT_NEAR(once[k].data[i], twice[k].data[i], 1e-15);
}

TEST(Mlp, RandomThreeLayerMatchesFiniteDifferences) {
  Rng rng(21);
  auto p = init_params(MLPConfig{5, {6, 4}, 3, Activation::relu}, 21);
  perturb(p, rng, 0.2);
  const auto x = random_vec(rng, 5), gy = random_vec(rng, 3);
  const auto res = grad_check(
      [&](const ParamStore& q) { return inner(mlp_forward(q, x), gy); },
      [&](const ParamStore& q) {
        MLPCache c;
        mlp_forward(q, x, c);
        return mlp_backward(q, c, gy);
      },
      p);
  EXPECT_EQ(res.coordinates, p.count());
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(Mlp, ForwardIsPure) {
  const auto p = init_params(MLPConfig{4, {5}, 2, Activation::relu}, 8);
  const auto before = p;
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_EQ(mlp_forward(p, x), mlp_forward(p, x));
  EXPECT_EQ(p, before);
}

TEST(Lstm, ZeroParametersGiveZero) {
  auto p = init_params(LSTMConfig{1, 3, 2}, 0);
  p.fill(0.0);
  const std::vector<std::vector<double>> seq{{5}, {-2}, {7}};
  const auto out = lstm_forward(p, seq);
  EXPECT_EQ(out.output, (std::vector<double>{0, 0}));
  for (const auto& h : out.hidden_states)
    for (double v : h) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, HandUnrolledSingleUnit) {
  // 1x1 model, gate order i, f, g, o in the stacked rows.
  auto p = init_params(LSTMConfig{1, 1, 1}, 0);
  const double wx[4] = {0.3, -0.2, 0.5, 0.1}, wh[4] = {-0.4, 0.25, 0.6, -0.3}, b[4] = {0.05, 1.0, -0.1, 0.2};
  p.at("W_x").data.assign(wx, wx + 4);
  p.at("W_h").data.assign(wh, wh + 4);
  p.at("b").data.assign(b, b + 4);
  p.at("W_out").data = {0.7};
  p.at("b_out").data = {-0.05};

  const double xs[2] = {0.8, -1.3};
  double h = 0, c = 0;
  std::vector<double> hs;
  for (double x : xs) {
    const double i = sig(wx[0] * x + wh[0] * h + b[0]);
    const double f = sig(wx[1] * x + wh[1] * h + b[1]);
    const double g = std::tanh(wx[2] * x + wh[2] * h + b[2]);
    const double o = sig(wx[3] * x + wh[3] * h + b[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
    hs.push_back(h);
  }
  const std::vector<std::vector<double>> seq1{{xs[0]}}, seq2{{xs[0]}, {xs[1]}};
  EXPECT_NEAR(lstm_forward(p, seq1).hidden_states[0][0], hs[0], 1e-15);
  const auto out = lstm_forward(p, seq2);
  EXPECT_NEAR(out.hidden_states[1][0], hs[1], 1e-15);
  EXPECT_NEAR(out.output[0], 0.7 * hs[1] - 0.05, 1e-15);
}

TEST(Lstm, Errors) {
  const auto p = init_params(LSTMConfig{2, 3, 1}, 0);
  EXPECT_THROW(lstm_forward(p, std::vector<std::vector<double>>{}), Error);
  EXPECT_THROW(lstm_forward(p, std::vector<std::vector<double>>{{1.0}}), Error);
  try {
    lstm_forward(p, std::vector<std::vector<double>>{});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptySequence);
  }
}

TEST(Lstm, Deterministic) {
  const auto p = init_params(LSTMConfig{1, 4, 2}, 6);
  const std::vector<std::vector<double>> seq{{0.1}, {0.2}, {-0.3}};
  EXPECT_EQ(lstm_forward(p, seq).output, lstm_forward(p, seq).output);
}

TEST(Lstm, ZeroUpstreamGradientGivesZero) {
  const auto p = init_params(LSTMConfig{1, 4, 2}, 6);
  LSTMCache cache;
  lstm_forward(p, std::vector<std::vector<double>>{{0.1}, {0.2}}, cache);
  EXPECT_EQ(lstm_backward(p, cache, std::vector<double>{0, 0}).squared_norm(), 0.0);
}

TEST(Lstm, BpttMatchesFiniteDifferencesT3H4) {
  Rng rng(31);
  auto p = init_params(LSTMConfig{1, 4, 2}, 31);
  perturb(p, rng, 0.3);
  std::vector<std::vector<double>> seq;
  for (int t = 0; t < 3; ++t) seq.push_back({rng.normal()});
  const auto gy = random_vec(rng, 2);
  const auto res = grad_check(
      [&](const ParamStore& q) { return inner(lstm_forward(q, seq).output, gy); },
      [&](const ParamStore& q) {
        LSTMCache c;
        lstm_forward(q, seq, c);
        return lstm_backward(q, c, gy);
      },
      p);
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(Lstm, BpttMatchesFiniteDifferencesMultiInput) {
  Rng rng(32);
  auto p = init_params(LSTMConfig{3, 2, 2}, 32);
  perturb(p, rng, 0.3);
  std::vector<std::vector<double>> seq;
  for (int t = 0; t < 5; ++t) seq.push_back(random_vec(rng, 3));
  const auto gy = random_vec(rng, 2);
  const auto res = grad_check(
      [&](const ParamStore& q) { return inner(lstm_forward(q, seq).output, gy); },
      [&](const ParamStore& q) {
        LSTMCache c;
        lstm_forward(q, seq, c);
        return lstm_backward(q, c, gy);
      },
      p);
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(Lstm, GradientsIndependentOfOutputBias) {
  auto p = init_params(LSTMConfig{1, 3, 2}, 7);
  const std::vector<std::vector<double>> seq{{0.5}, {-0.1}, {0.9}};
  const std::vector<double> gy{0.4, -1.2};
  auto grads = [&] {
    LSTMCache c;
    lstm_forward(p, seq, c);
    return lstm_backward(p, c, gy);
  };
  const auto g0 = grads();
  p.at("b_out").data = {3.0, -8.0};
  const auto g1 = grads();
  for (const char* name : {"W_x", "W_h", "b", "W_out"}) EXPECT_EQ(g0.at(name).data, g1.at(name).data) << name;
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto p = init_params(MLPConfig{2, {2}, 1, Activation::relu}, 1);
  const auto before = p;
  AdamState st(p, {});
  adam_step(p, p.zeros_like(), st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore p;
  p.add("w", 1, 1).data = {0.0};
  auto g = p.zeros_like();
  g[0].data = {5.0};
  AdamState st(p, {.lr = 1e-3});
  adam_step(p, g, st);
  // mhat = 5, vhat = 25: step = lr * 5 / (5 + eps)
  EXPECT_NEAR(p[0].data[0], -1e-3 * 5.0 / (5.0 + 1e-8), 1e-18);
  EXPECT_NEAR(p[0].data[0], -1e-3, 1e-11);
}

TEST(Adam, SecondStepOracle) {
  ParamStore p;
  p.add("w", 1, 1).data = {1.0};
  auto g = p.zeros_like();
  AdamState st(p, {.lr = 0.01});
  g[0].data = {2.0};
  adam_step(p, g, st);
  g[0].data = {-1.0};
  adam_step(p, g, st);
  // textbook recursion, written out
  double m = 0, v = 0, w = 1;
  const double gs[2] = {2.0, -1.0};
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * gs[t - 1];
    v = 0.999 * v + 0.001 * gs[t - 1] * gs[t - 1];
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(p[0].data[0], w, 1e-15);
}

TEST(Adam, Deterministic) {
  auto a = init_params(MLPConfig{3, {4}, 2, Activation::relu}, 2);
  auto b = a;
  Rng rng(4);
  auto g = a.zeros_like();
  perturb(g, rng, 1.0);
  AdamState sa(a, {}), sb(b, {});
  adam_step(a, g, sa);
  adam_step(b, g, sb);
  EXPECT_EQ(a, b);
}

TEST(Adam, DecoupledDecayOnlyOnWeights) {
  ParamStore p;
  p.add("W", 1, 1).data = {2.0};
  p.add("b", 1, 1).data = {2.0};
  AdamState st(p, {.lr = 0.1, .weight_decay = 0.5});
  adam_step(p, p.zeros_like(), st);
  EXPECT_NEAR(p.at("W").data[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
  EXPECT_EQ(p.at("b").data[0], 2.0);
}

TEST(Adam, ShapeMismatch) {
  auto p = init_params(MLPConfig{2, {2}, 1, Activation::relu}, 1);
  AdamState st(p, {});
  const auto other = init_params(MLPConfig{3, {2}, 1, Activation::relu}, 1);
  EXPECT_THROW(adam_step(p, other, st), Error);
}

TEST(Clip, GlobalNorm) {
  ParamStore g;
  g.add("a", 1, 2).data = {3, 0};
  g.add("b", 1, 1).data = {4};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_EQ(g.at("a").data[0], 3.0);
  clip_global_norm(g, 1.0);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 1.0, 1e-15);
  EXPECT_NEAR(g.at("b").data[0], 0.8, 1e-15);
}

TEST(GradCheck, Quadratic) {
  ParamStore p;
  p.add("w", 1, 1).data = {3.0};
  const auto res = grad_check([](const ParamStore& q) { return q[0].data[0] * q[0].data[0]; },
                              [](const ParamStore& q) {
                                auto g = q.zeros_like();
                                g[0].data[0] = 2 * q[0].data[0];
                                return g;
                              },
                              p);
  EXPECT_LT(res.max_rel_error, 1e-9);
}

TEST(GradCheck, Constant) {
  ParamStore p;
  p.add("w", 1, 2).data = {1.0, -4.0};
  const auto res = grad_check([](const ParamStore&) { return 7.0; },
                              [](const ParamStore& q) { return q.zeros_like(); }, p);
  EXPECT_EQ(res.max_rel_error, 0.0);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParamStore p;
  p.add("w", 1, 1).data = {3.0};
  const auto res = grad_check([](const ParamStore& q) { return q[0].data[0] * q[0].data[0]; },
                              [](const ParamStore& q) {
                                auto g = q.zeros_like();
                                g[0].data[0] = 5.0;
                                return g;
                              },
                              p);
  EXPECT_GT(res.max_rel_error, 0.1);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

TEST(GradCheck, SuitePassesForSeveralSeeds) {
  for (std::uint64_t seed : {0u, 1u, 2u, 42u})
    for (const auto& r : gradcheck_suite(seed)) EXPECT_TRUE(r.passed()) << r.model << " seed " << seed;
}
