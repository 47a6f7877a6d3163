#pragma once

// Plot-ready CSV and JSON outputs. In every CSV, `origin_time` is the epoch
// hour of the first forecast step and `step` counts from 0, so a row
// describes hour origin_time + step.
//
//   SFF forecasts:   beam_id,origin_time,step,mu,sigma,p01,p05,p25,p50,p75,p95,p99
//   point forecasts: beam_id,origin_time,step,value
//   percentiles:     beam_id,origin_time,step,p01,...,p99   (ECDF of sample paths)
//   allocations:     beam_id,origin_time,step,allocated,actual,verdict
//   errors:          model,beam_id,mae,rmse                 (beam "ALL" = pooled)

#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ntnfc/decision.hpp"
#include "ntnfc/error.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/metrics.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/text_io.hpp"

namespace ntnfc {

inline constexpr const char* kSffForecastHeader = "beam_id,origin_time,step,mu,sigma,p01,p05,p25,p50,p75,p95,p99";
inline constexpr const char* kPointForecastHeader = "beam_id,origin_time,step,value";
inline constexpr const char* kAllocationHeader = "beam_id,origin_time,step,allocated,actual,verdict";
inline constexpr double kBandProbabilities[] = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};

namespace detail {
inline void row_prefix(std::string& out, const std::string& beam, EpochHour origin, std::size_t step) {
  out += beam;
  out += ',';
  out += std::to_string(origin);
  out += ',';
  out += std::to_string(step);
}
inline void cell(std::string& out, double v) {
  out += ',';
  out += text::format_double(v);
}
}  // namespace detail

inline void append_forecast_rows(std::string& out, const GaussianForecast& f) {
  std::vector<std::vector<double>> bands;
  for (double p : kBandProbabilities) bands.push_back(quantile_closed_form(f, p));
  for (std::size_t t = 0; t < f.horizon(); ++t) {
    detail::row_prefix(out, f.beam_id, f.origin_time, t);
    detail::cell(out, f.mu[t]);
    detail::cell(out, f.sigma[t]);
    for (const auto& b : bands) detail::cell(out, b[t]);
    out += '\n';
  }
}

inline void append_forecast_rows(std::string& out, const PointForecast& f) {
  for (std::size_t t = 0; t < f.horizon(); ++t) {
    detail::row_prefix(out, f.beam_id, f.origin_time, t);
    detail::cell(out, f.values[t]);
    out += '\n';
  }
}

/// All forecasts must be of one kind.
template <typename F>
std::string forecasts_to_csv(std::span<const F> forecasts) {
  std::string out = std::is_same_v<F, GaussianForecast> ? kSffForecastHeader : kPointForecastHeader;
  out += '\n';
  for (const auto& f : forecasts) append_forecast_rows(out, f);
  return out;
}

inline std::string percentile_header() {
  std::string h = "beam_id,origin_time,step";
  char buf[8];
  for (int k = 1; k <= 99; ++k) {
    std::snprintf(buf, sizeof buf, ",p%02d", k);
    h += buf;
  }
  return h;
}

inline void append_percentile_rows(std::string& out, const QuantileGrid& g) {
  for (std::size_t t = 0; t < g.horizon; ++t) {
    detail::row_prefix(out, g.beam_id, g.origin_time, t);
    for (std::size_t k = 0; k < g.probabilities.size(); ++k) detail::cell(out, g(k, t));
    out += '\n';
  }
}

inline void append_allocation_rows(std::string& out, const AllocationPlan& plan, std::span<const double> actual) {
  for (std::size_t t = 0; t < plan.amounts.size(); ++t) {
    detail::row_prefix(out, plan.beam_id, plan.origin_time, t);
    detail::cell(out, plan.amounts[t]);
    detail::cell(out, actual[t]);
    out += ',';
    out += verdict_name(classify(plan.amounts[t], actual[t]));
    out += '\n';
  }
}

/// Reads either forecast CSV flavour. Rows of one (beam, origin) pair must
/// be contiguous with steps 0..H-1 in order.
inline std::vector<Forecast> parse_forecast_csv(std::string_view text) {
  std::vector<Forecast> out;
  std::size_t start = 0, line_no = 0;
  enum { unknown, gaussian, point } kind = unknown;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text::trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (kind == unknown) {
      if (line == kSffForecastHeader) kind = gaussian;
      else if (line == kPointForecastHeader) kind = point;
      else throw Error(Errc::MissingColumn, "unrecognized forecast CSV header");
      continue;
    }
    const std::string where = " at line " + std::to_string(line_no);
    const auto cells = text::split(line);
    const std::size_t want = kind == gaussian ? 12 : 4;
    if (cells.size() != want) throw Error(Errc::MalformedRow, "wrong number of fields" + where);
    EpochHour origin;
    std::int64_t step;
    double a, b = 0.0;
    if (!text::parse_int(cells[1], origin) || !text::parse_int(cells[2], step) || !text::parse_double(cells[3], a) ||
        (kind == gaussian && !text::parse_double(cells[4], b)))
      throw Error(Errc::MalformedRow, "unparsable number" + where);
    const std::string beam(cells[0]);
    const bool continues = !out.empty() && beam_of(out.back()) == beam && origin_of(out.back()) == origin;
    if (!continues) {
      if (step != 0) throw Error(Errc::MalformedRow, "forecast must start at step 0" + where);
      if (kind == gaussian) out.emplace_back(GaussianForecast{beam, origin, {}, {}});
      else out.emplace_back(PointForecast{beam, origin, {}});
    }
    if (auto* g = std::get_if<GaussianForecast>(&out.back())) {
      if (static_cast<std::size_t>(step) != g->mu.size()) throw Error(Errc::MalformedRow, "steps out of order" + where);
      if (!(b > 0.0)) throw Error(Errc::NonPositiveSigma, "sigma must be positive" + where);
      g->mu.push_back(a);
      g->sigma.push_back(b);
    } else {
      auto& p = std::get<PointForecast>(out.back());
      if (static_cast<std::size_t>(step) != p.values.size()) throw Error(Errc::MalformedRow, "steps out of order" + where);
      p.values.push_back(a);
    }
  }
  if (kind == unknown) throw Error(Errc::MissingColumn, "empty forecast file");
  if (out.empty()) throw Error(Errc::EmptyDataset, "forecast file has no rows");
  return out;
}

// ---------------------------------------------------------------------------
// report.json

namespace detail {

inline nlohmann::json outcome_json(const ProvisioningOutcome& o) {
  return {{"over_count", o.over_count},   {"under_count", o.under_count}, {"exact_count", o.exact_count},
          {"over_rate", o.over_rate},     {"under_rate", o.under_rate},   {"over_volume", o.over_volume},
          {"under_volume", o.under_volume}};
}

inline nlohmann::json metrics_json(const MetricsRecord& m) {
  nlohmann::json j = {{"mae", m.mae}, {"rmse", m.rmse}};
  if (m.coverage_50) j["coverage_50"] = *m.coverage_50;
  if (m.coverage_90) j["coverage_90"] = *m.coverage_90;
  return j;
}

}  // namespace detail

/// {
///   "models": { <model>: { "policy", "points", "metrics": {mae, rmse[, coverage_50, coverage_90]},
///                          "per_beam_mean": {mae, rmse}, "provisioning": {counts, rates, volumes},
///                          "beams": { <beam>: {"metrics", "provisioning"} } } },
///   "provisioning_split": { <model>: {"over": rate, "under": rate} }
/// }
inline nlohmann::json report_json(const std::map<std::string, ModelSummary>& summaries,
                                  const std::map<std::string, std::string>& policies) {
  nlohmann::json models = nlohmann::json::object();
  nlohmann::json split = nlohmann::json::object();
  for (const auto& [name, s] : summaries) {
    nlohmann::json beams = nlohmann::json::object();
    for (const auto& [beam, b] : s.beams)
      beams[beam] = {{"metrics", detail::metrics_json(b.metrics)}, {"provisioning", detail::outcome_json(b.provisioning)}};
    auto it = policies.find(name);
    models[name] = {{"policy", it == policies.end() ? "point" : it->second},
                    {"points", s.points},
                    {"metrics", detail::metrics_json(s.pooled)},
                    {"per_beam_mean", {{"mae", s.per_beam_mean_mae}, {"rmse", s.per_beam_mean_rmse}}},
                    {"provisioning", detail::outcome_json(s.provisioning)},
                    {"beams", std::move(beams)}};
    split[name] = {{"over", s.provisioning.over_rate}, {"under", s.provisioning.under_rate}};
  }
  return {{"models", std::move(models)}, {"provisioning_split", std::move(split)}};
}

inline std::string errors_csv(const std::map<std::string, ModelSummary>& summaries) {
  std::string out = "model,beam_id,mae,rmse\n";
  for (const auto& [name, s] : summaries) {
    for (const auto& [beam, b] : s.beams)
      out += name + "," + beam + "," + text::format_double(b.metrics.mae) + "," + text::format_double(b.metrics.rmse) + "\n";
    out += name + ",ALL," + text::format_double(s.pooled.mae) + "," + text::format_double(s.pooled.rmse) + "\n";
  }
  return out;
}

}  // namespace ntnfc
