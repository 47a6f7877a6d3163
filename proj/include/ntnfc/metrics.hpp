#pragma once

// Forecast accuracy, interval coverage and per-model aggregation.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntnfc/decision.hpp"
#include "ntnfc/error.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/normal.hpp"

namespace ntnfc {

namespace detail {
inline void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw Error(Errc::ShapeMismatch, "metric inputs must have equal, non-empty lengths");
}
}  // namespace detail

inline double mae(std::span<const double> pred, std::span<const double> actual) {
  detail::check_pair(pred, actual);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  detail::check_pair(pred, actual);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

/// Number of actuals inside the central `level` interval (bounds inclusive).
inline std::size_t interval_hits(const GaussianForecast& f, std::span<const double> actual, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::InvalidProbability, "coverage level must lie in (0, 1)");
  if (actual.size() != f.horizon()) throw Error(Errc::ShapeMismatch, "actuals do not match the forecast horizon");
  const auto lo = quantile_closed_form(f, (1.0 - level) / 2.0);
  const auto hi = quantile_closed_form(f, (1.0 + level) / 2.0);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < actual.size(); ++t)
    if (actual[t] >= lo[t] && actual[t] <= hi[t]) ++hits;
  return hits;
}

inline double interval_coverage(const GaussianForecast& f, std::span<const double> actual, double level) {
  const auto hits = interval_hits(f, actual, level);
  return actual.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(actual.size());
}

struct MetricsRecord {
  std::string model;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> coverage_50;  // probabilistic models only
  std::optional<double> coverage_90;
};

inline MetricsRecord evaluate_forecast(const std::string& model, const Forecast& f, std::span<const double> actual) {
  const auto& point = point_values(f);
  MetricsRecord r{model, mae(point, actual), rmse(point, actual), std::nullopt, std::nullopt};
  if (const auto* g = std::get_if<GaussianForecast>(&f)) {
    r.coverage_50 = interval_coverage(*g, actual, 0.5);
    r.coverage_90 = interval_coverage(*g, actual, 0.9);
  }
  return r;
}

/// One audited forecast: what a model predicted for one beam on one day,
/// what it allocated and how that compared with reality.
struct EvaluationRecord {
  std::size_t day = 0;
  std::string beam_id;
  std::string model;
  Forecast forecast;
  std::vector<double> actual;
  AllocationPlan plan;
  ProvisioningOutcome outcome;
  MetricsRecord metrics;
};

struct BeamSummary {
  MetricsRecord metrics;
  ProvisioningOutcome provisioning;
};

struct ModelSummary {
  MetricsRecord pooled;            // over every (beam, day, step) point
  ProvisioningOutcome provisioning;
  std::size_t points = 0;
  double per_beam_mean_mae = 0.0;  // unweighted mean of per-beam values
  double per_beam_mean_rmse = 0.0;
  std::map<std::string, BeamSummary> beams;
};

namespace detail {

struct Pool {
  std::vector<double> pred, actual;
  std::size_t hits50 = 0, hits90 = 0;
  bool probabilistic = false;
  ProvisioningOutcome prov;

  void add(const EvaluationRecord& r) {
    const auto& p = point_values(r.forecast);
    pred.insert(pred.end(), p.begin(), p.end());
    actual.insert(actual.end(), r.actual.begin(), r.actual.end());
    if (const auto* g = std::get_if<GaussianForecast>(&r.forecast)) {
      probabilistic = true;
      hits50 += interval_hits(*g, r.actual, 0.5);
      hits90 += interval_hits(*g, r.actual, 0.9);
    }
    prov += r.outcome;
  }

  MetricsRecord metrics(const std::string& model) const {
    MetricsRecord m{model, ntnfc::mae(pred, actual), ntnfc::rmse(pred, actual), std::nullopt, std::nullopt};
    if (probabilistic) {
      const double n = static_cast<double>(actual.size());
      m.coverage_50 = static_cast<double>(hits50) / n;
      m.coverage_90 = static_cast<double>(hits90) / n;
    }
    return m;
  }
};

}  // namespace detail

/// Pools every horizon point per model (and per model and beam).
inline std::map<std::string, ModelSummary> summarize(std::span<const EvaluationRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyLog, "nothing to summarize");
  std::map<std::string, detail::Pool> by_model;
  std::map<std::string, std::map<std::string, detail::Pool>> by_beam;
  for (const auto& r : records) {
    by_model[r.model].add(r);
    by_beam[r.model][r.beam_id].add(r);
  }
  std::map<std::string, ModelSummary> out;
  for (const auto& [model, pool] : by_model) {
    ModelSummary s;
    s.pooled = pool.metrics(model);
    s.provisioning = pool.prov;
    s.points = pool.actual.size();
    for (const auto& [beam, bp] : by_beam[model]) {
      s.beams[beam] = {bp.metrics(model), bp.prov};
      s.per_beam_mean_mae += s.beams[beam].metrics.mae;
      s.per_beam_mean_rmse += s.beams[beam].metrics.rmse;
    }
    s.per_beam_mean_mae /= static_cast<double>(s.beams.size());
    s.per_beam_mean_rmse /= static_cast<double>(s.beams.size());
    out.emplace(model, std::move(s));
  }
  return out;
}

}  // namespace ntnfc
