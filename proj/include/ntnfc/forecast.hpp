#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ntnfc/timeseries.hpp"

namespace ntnfc {

/// Per-step Gaussian predictive distribution, in traffic units.
struct GaussianForecast {
  std::string beam_id;
  EpochHour origin_time = 0;
  std::vector<double> mu;
  std::vector<double> sigma;

  std::size_t horizon() const noexcept { return mu.size(); }
  friend bool operator==(const GaussianForecast&, const GaussianForecast&) = default;
};

/// Single-valued forecast. Carries no uncertainty information.
struct PointForecast {
  std::string beam_id;
  EpochHour origin_time = 0;
  std::vector<double> values;

  std::size_t horizon() const noexcept { return values.size(); }
  friend bool operator==(const PointForecast&, const PointForecast&) = default;
};

/// n x H draws, row-major: path i, step t at values[i * horizon + t].
struct SamplePaths {
  std::size_t n = 0;
  std::size_t horizon = 0;
  std::vector<double> values;
  std::uint64_t seed = 0;

  double operator()(std::size_t path, std::size_t step) const { return values[path * horizon + step]; }
};

using Forecast = std::variant<GaussianForecast, PointForecast>;

inline const std::string& beam_of(const Forecast& f) {
  return std::visit([](const auto& x) -> const std::string& { return x.beam_id; }, f);
}

inline EpochHour origin_of(const Forecast& f) {
  return std::visit([](const auto& x) { return x.origin_time; }, f);
}

/// The point forecast: the mean for Gaussian forecasts.
inline const std::vector<double>& point_values(const Forecast& f) {
  if (const auto* g = std::get_if<GaussianForecast>(&f)) return g->mu;
  return std::get<PointForecast>(f).values;
}

}  // namespace ntnfc
