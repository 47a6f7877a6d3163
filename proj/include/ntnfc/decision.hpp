#pragma once

// Turning forecasts into capacity allocations, and auditing those
// allocations against the traffic that actually arrived.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ntnfc/error.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/text_io.hpp"

namespace ntnfc {

/// probabilities[k] for k = 0..P-1 and an H-step forecast; values is P x H
/// row-major.
struct QuantileGrid {
  std::string beam_id;
  EpochHour origin_time = 0;
  std::vector<double> probabilities;
  std::size_t horizon = 0;
  std::vector<double> values;

  double operator()(std::size_t k, std::size_t step) const { return values[k * horizon + step]; }
  std::span<const double> row(std::size_t k) const { return {values.data() + k * horizon, horizon}; }
  friend bool operator==(const QuantileGrid&, const QuantileGrid&) = default;
};

/// 0.01, 0.02, ..., 0.99
inline std::vector<double> percentile_probabilities() {
  std::vector<double> p(99);
  for (int k = 1; k <= 99; ++k) p[k - 1] = k / 100.0;
  return p;
}

inline void check_probabilities(std::span<const double> probs) {
  if (probs.empty()) throw Error(Errc::InvalidProbability, "no probabilities given");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0 && probs[i] < 1.0))
      throw Error(Errc::InvalidProbability, "probabilities must lie in (0, 1)");
    if (i > 0 && !(probs[i] > probs[i - 1]))
      throw Error(Errc::InvalidProbability, "probabilities must be strictly ascending");
  }
}

/// Left-continuous inverse ECDF per step: the smallest sample s with
/// #{x <= s} / n >= p. No interpolation.
inline QuantileGrid ecdf_quantiles(const SamplePaths& paths, std::span<const double> probs,
                                   std::string beam_id = {}, EpochHour origin_time = 0) {
  check_probabilities(probs);
  if (paths.n == 0) throw Error(Errc::InvalidConfig, "no sample paths");
  const std::size_t n = paths.n;
  const double nd = static_cast<double>(n);
  QuantileGrid grid{std::move(beam_id), origin_time, {probs.begin(), probs.end()}, paths.horizon,
                    std::vector<double>(probs.size() * paths.horizon)};

  // Rank index for each probability: smallest k with (k+1)/n >= p.
  std::vector<std::size_t> rank(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = probs[j];
    auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(p * nd) - 1.0));
    while (k > 0 && static_cast<double>(k) / nd >= p) --k;
    while (k + 1 < n && static_cast<double>(k + 1) / nd < p) ++k;
    rank[j] = std::min(k, n - 1);
  }

  std::vector<double> column(n);
  for (std::size_t t = 0; t < paths.horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) column[i] = paths(i, t);
    std::sort(column.begin(), column.end());
    for (std::size_t j = 0; j < probs.size(); ++j) grid.values[j * paths.horizon + t] = column[rank[j]];
  }
  return grid;
}

/// Closed-form grid for a Gaussian forecast.
inline QuantileGrid closed_form_grid(const GaussianForecast& f, std::span<const double> probs) {
  check_probabilities(probs);
  QuantileGrid grid{f.beam_id, f.origin_time, {probs.begin(), probs.end()}, f.horizon(), {}};
  grid.values.reserve(probs.size() * f.horizon());
  for (double p : probs) {
    const auto q = quantile_closed_form(f, p);
    grid.values.insert(grid.values.end(), q.begin(), q.end());
  }
  return grid;
}

struct AllocationPolicy {
  enum class Kind { point, quantile, headroom };
  Kind kind = Kind::point;
  double param = 0.0;  // p for quantile, factor for headroom

  static AllocationPolicy point() { return {}; }
  static AllocationPolicy quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::InvalidProbability, "quantile policy needs p in (0, 1)");
    return {Kind::quantile, p};
  }
  static AllocationPolicy headroom(double factor) {
    if (!(factor >= 0.0 && std::isfinite(factor)))
      throw Error(Errc::InvalidConfig, "headroom factor must be finite and >= 0");
    return {Kind::headroom, factor};
  }

  /// "point", "quantile:<p>" or "headroom:<factor>".
  static AllocationPolicy parse(std::string_view s) {
    if (s == "point") return point();
    const auto colon = s.find(':');
    double v;
    if (colon != std::string_view::npos && text::parse_double(s.substr(colon + 1), v)) {
      const auto kind = s.substr(0, colon);
      if (kind == "quantile") return quantile(v);
      if (kind == "headroom") return headroom(v);
    }
    throw Error(Errc::InvalidConfig, "unknown policy '" + std::string(s) +
                                         "' (expected point, quantile:<p> or headroom:<factor>)");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::point: return "point";
      case Kind::quantile: return "quantile:" + text::format_double(param);
      case Kind::headroom: return "headroom:" + text::format_double(param);
    }
    return "point";
  }

  friend bool operator==(const AllocationPolicy&, const AllocationPolicy&) = default;
};

struct AllocationPlan {
  std::string beam_id;
  EpochHour origin_time = 0;
  std::vector<double> amounts;

  friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;
};

using DecisionInput = std::variant<GaussianForecast, PointForecast, QuantileGrid>;

namespace detail {

inline std::vector<double> grid_row(const QuantileGrid& g, double p) {
  for (std::size_t k = 0; k < g.probabilities.size(); ++k)
    if (std::abs(g.probabilities[k] - p) <= 1e-9) {
      auto r = g.row(k);
      return {r.begin(), r.end()};
    }
  throw Error(Errc::IncompatiblePolicy, "probability " + text::format_double(p) + " is not on the quantile grid");
}

inline AllocationPlan clamp_plan(std::string beam, EpochHour origin, std::vector<double> v) {
  for (double& x : v) x = std::max(0.0, x);
  return {std::move(beam), origin, std::move(v)};
}

}  // namespace detail

inline AllocationPlan decide_allocation(const DecisionInput& input, const AllocationPolicy& policy) {
  using Kind = AllocationPolicy::Kind;
  return std::visit(
      [&](const auto& f) -> AllocationPlan {
        using T = std::decay_t<decltype(f)>;
        std::vector<double> base;
        if constexpr (std::is_same_v<T, GaussianForecast>) {
          if (policy.kind == Kind::quantile) return detail::clamp_plan(f.beam_id, f.origin_time, quantile_closed_form(f, policy.param));
          base = f.mu;
        } else if constexpr (std::is_same_v<T, PointForecast>) {
          if (policy.kind == Kind::quantile)
            throw Error(Errc::IncompatiblePolicy, "quantile policy needs a distributional forecast");
          base = f.values;
        } else {
          if (policy.kind == Kind::quantile) return detail::clamp_plan(f.beam_id, f.origin_time, detail::grid_row(f, policy.param));
          base = detail::grid_row(f, 0.5);
        }
        if (policy.kind == Kind::headroom)
          for (double& x : base) x *= 1.0 + policy.param;
        return detail::clamp_plan(f.beam_id, f.origin_time, std::move(base));
      },
      input);
}

inline AllocationPlan decide_allocation(const Forecast& f, const AllocationPolicy& policy) {
  return std::visit([&](const auto& x) { return decide_allocation(DecisionInput{x}, policy); }, f);
}

inline constexpr double kExactTolerance = 1e-9;

enum class Verdict { over, under, exact };

inline Verdict classify(double allocated, double actual) {
  const double d = allocated - actual;
  if (std::abs(d) <= kExactTolerance) return Verdict::exact;
  return d > 0.0 ? Verdict::over : Verdict::under;
}

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::over: return "over";
    case Verdict::under: return "under";
    case Verdict::exact: return "exact";
  }
  return "exact";
}

struct ProvisioningOutcome {
  std::size_t over_count = 0;
  std::size_t under_count = 0;
  std::size_t exact_count = 0;
  double over_rate = 0.0;
  double under_rate = 0.0;
  double over_volume = 0.0;
  double under_volume = 0.0;

  std::size_t total() const noexcept { return over_count + under_count + exact_count; }

  /// Rates over the non-exact steps. under_rate is 1 - over_rate, which
  /// makes the pair sum to exactly 1.0 in floating point.
  void update_rates() {
    const std::size_t decided = over_count + under_count;
    if (decided == 0) {
      over_rate = under_rate = 0.0;
      return;
    }
    over_rate = static_cast<double>(over_count) / static_cast<double>(decided);
    under_rate = 1.0 - over_rate;
  }

  ProvisioningOutcome& operator+=(const ProvisioningOutcome& o) {
    over_count += o.over_count;
    under_count += o.under_count;
    exact_count += o.exact_count;
    over_volume += o.over_volume;
    under_volume += o.under_volume;
    update_rates();
    return *this;
  }

  friend bool operator==(const ProvisioningOutcome&, const ProvisioningOutcome&) = default;
};

inline ProvisioningOutcome account_provisioning(const AllocationPlan& plan, std::span<const double> actual) {
  if (plan.amounts.size() != actual.size())
    throw Error(Errc::ShapeMismatch, "plan has " + std::to_string(plan.amounts.size()) + " steps, actuals " +
                                         std::to_string(actual.size()));
  ProvisioningOutcome o;
  for (std::size_t t = 0; t < actual.size(); ++t) {
    const double d = plan.amounts[t] - actual[t];
    switch (classify(plan.amounts[t], actual[t])) {
      case Verdict::over:
        ++o.over_count;
        o.over_volume += d;
        break;
      case Verdict::under:
        ++o.under_count;
        o.under_volume -= d;
        break;
      case Verdict::exact:
        ++o.exact_count;
        break;
    }
  }
  o.update_rates();
  return o;
}

}  // namespace ntnfc
