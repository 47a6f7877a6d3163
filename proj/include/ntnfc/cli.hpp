#pragma once

// `ntnfc` command line. run() is the whole program minus main(), so tests
// can drive it with captured streams.
//
// Exit codes: 0 success, 1 bad input (arguments, configs, data), 2 runtime
// failure. Every output file is written to a temporary name and renamed on
// success, so a failed command leaves nothing behind.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntnfc/checkpoint.hpp"
#include "ntnfc/config.hpp"
#include "ntnfc/decision.hpp"
#include "ntnfc/error.hpp"
#include "ntnfc/formats.hpp"
#include "ntnfc/metrics.hpp"
#include "ntnfc/sim.hpp"
#include "ntnfc/text_io.hpp"
#include "ntnfc/timeseries.hpp"
#include "ntnfc/verify.hpp"

namespace ntnfc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kSpecSchema = R"(spec JSON (all keys optional):
  n_beams, n_days, base_load, diurnal_amplitude, weekly_amplitude,
  noise_ar_coeff, noise_std, burst_rate (per day), burst_scale,
  burst_decay_hours, phase_offsets [hours, one per beam], start_time (epoch hour))";

inline constexpr const char* kTrainSchema = R"(train config JSON:
  seed (required), context_len=168, horizon=24, stride (sff 1, lstm 12),
  train_until (epoch hour; only hours before it are used),
  epochs, batch_size, lr, weight_decay,
  hidden_dims [..] (sff) | hidden_dim (lstm))";

inline constexpr const char* kSimSchema = R"(simulation config JSON:
  seed (required),
  dataset: {"synthetic": {spec}, "seed": N} | {"csv": "path"} (required),
  models ["sff","lstm"], mode "rolling"|"replay", context_len, horizon,
  n_eval_days, retrain_every, policies {"sff": "quantile:0.9", ...},
  sff {epochs, batch_size, lr, weight_decay, hidden_dims, train_stride},
  lstm {epochs, batch_size, lr, weight_decay, hidden_dim, train_stride},
  n_sample_paths=1000, quantile_source "ecdf"|"closed_form",
  record_wall_times=false)";

namespace detail {

inline std::string model_kind(const AnyModel& m) { return std::holds_alternative<SFFModel>(m) ? "sff" : "lstm"; }

inline int gen_data(const std::optional<std::string>& spec_path, std::uint64_t seed, const std::string& out) {
  SyntheticSpec spec;
  if (spec_path) spec = config::synthetic_spec_from_json(config::parse_json_file(*spec_path));
  text::write_file_atomic(out, to_csv(generate_synthetic(spec, seed)));
  return kExitOk;
}

inline int train(const std::string& model, const std::string& data, const std::string& cfg_path,
                 const std::string& out, std::ostream& os) {
  const auto cfg = config::train_config_from_json(config::parse_json_file(cfg_path), model);
  Dataset ds = load_csv(data);
  if (cfg.train_until) ds = slice(ds, ds.start_time(), *cfg.train_until);
  const auto windows = make_windows(ds, cfg.context_len, cfg.horizon, cfg.stride);
  AnyModel m = model == "sff" ? AnyModel{train_sff(windows, cfg.sff, cfg.horizon)}
                              : AnyModel{train_lstm(windows, cfg.lstm, cfg.horizon)};
  save_checkpoint(m, out);
  const auto& log = std::visit([](const auto& x) -> const std::vector<double>& { return x.training_log; }, m);
  os << model << ": " << windows.size() << " windows, " << log.size() << " epochs";
  if (!log.empty()) os << ", final loss " << text::format_double(log.back());
  os << "\n";
  return kExitOk;
}

/// Context for `origin` is the `context_len` hours before it in every beam.
inline std::vector<Forecast> forecast_all(const AnyModel& m, const Dataset& ds, EpochHour origin) {
  const std::size_t C = std::visit([](const auto& x) { return x.context_len; }, m);
  const EpochHour start = ds.start_time();
  if (origin - start < static_cast<EpochHour>(C) || origin > start + static_cast<EpochHour>(ds.length()))
    throw Error(Errc::InsufficientHistory, "origin " + std::to_string(origin) + " needs " + std::to_string(C) +
                                               " hours of data before it");
  std::vector<Forecast> out;
  for (const auto& s : ds.series) {
    const std::span<const double> ctx(s.values.data() + (origin - start) - static_cast<EpochHour>(C), C);
    if (const auto* sff = std::get_if<SFFModel>(&m)) out.emplace_back(predict_sff(*sff, ctx, s.beam_id, origin));
    else out.emplace_back(predict_lstm(std::get<LSTMModel>(m), ctx, s.beam_id, origin));
  }
  return out;
}

inline int forecast(const std::string& model_path, const std::string& data, EpochHour origin, const std::string& out) {
  const auto model = load_checkpoint(model_path);
  const auto fcs = forecast_all(model, load_csv(data), origin);
  std::string csv;
  if (std::holds_alternative<SFFModel>(model)) {
    std::vector<GaussianForecast> g;
    for (const auto& f : fcs) g.push_back(std::get<GaussianForecast>(f));
    csv = forecasts_to_csv<GaussianForecast>(g);
  } else {
    std::vector<PointForecast> p;
    for (const auto& f : fcs) p.push_back(std::get<PointForecast>(f));
    csv = forecasts_to_csv<PointForecast>(p);
  }
  text::write_file_atomic(out, csv);
  return kExitOk;
}

/// Audits forecasts against the realized data. Quantile policies use the
/// closed-form Gaussian quantiles here (no sample paths).
inline int evaluate(const std::string& fc_path, const std::string& data, const std::string& policy_text,
                    const std::optional<std::string>& name, const std::string& out,
                    const std::optional<std::string>& errors_out) {
  const auto policy = AllocationPolicy::parse(policy_text);
  const auto fcs = parse_forecast_csv(text::read_file(fc_path));
  const Dataset ds = load_csv(data);
  std::vector<EvaluationRecord> records;
  for (const auto& f : fcs) {
    const std::string model = name.value_or(std::holds_alternative<GaussianForecast>(f) ? "sff" : "lstm");
    const auto* s = ds.find(beam_of(f));
    if (!s) throw Error(Errc::MissingColumn, "no data for beam '" + beam_of(f) + "'");
    const auto H = static_cast<EpochHour>(point_values(f).size());
    const EpochHour origin = origin_of(f);
    if (origin < s->start_time || origin + H > s->end_time())
      throw Error(Errc::InsufficientHistory, "data does not cover the forecast span of beam '" + s->beam_id + "'");
    std::vector<double> actual(s->values.begin() + (origin - s->start_time),
                               s->values.begin() + (origin - s->start_time + H));
    auto plan = decide_allocation(f, policy);
    auto outcome = account_provisioning(plan, actual);
    auto metrics = evaluate_forecast(model, f, actual);
    records.push_back({0, s->beam_id, model, f, std::move(actual), std::move(plan), outcome, std::move(metrics)});
  }
  const auto summaries = summarize(records);
  std::map<std::string, std::string> policies;
  for (const auto& [m, _] : summaries) policies[m] = policy.to_string();
  text::write_file_atomic(out, report_json(summaries, policies).dump(2) + "\n");
  if (errors_out) text::write_file_atomic(*errors_out, errors_csv(summaries));
  return kExitOk;
}

inline int simulate(const std::string& cfg_path, const std::string& out, const std::optional<std::string>& mode,
                    std::ostream& os) {
  const std::filesystem::path p(cfg_path);
  auto cfg = config::sim_config_from_json(config::parse_json_file(p), p.parent_path());
  if (mode) {
    if (*mode == "replay") cfg.mode = SimMode::replay;
    else if (*mode == "rolling") cfg.mode = SimMode::rolling;
  }
  const auto log = cfg.mode == SimMode::replay ? replay_case_study(cfg) : run_simulation(cfg);
  write_simlog(log, out);
  const auto summaries = summarize(log.records);
  for (const auto& [m, s] : summaries) {
    os << m << ": mae " << text::format_double(s.pooled.mae) << ", rmse " << text::format_double(s.pooled.rmse)
       << ", over " << text::format_double(s.provisioning.over_rate) << ", under "
       << text::format_double(s.provisioning.under_rate);
    if (s.pooled.coverage_90)
      os << ", cov50 " << text::format_double(*s.pooled.coverage_50) << ", cov90 "
         << text::format_double(*s.pooled.coverage_90);
    os << "\n";
  }
  return kExitOk;
}

inline int gradcheck(std::uint64_t seed, std::ostream& os) {
  bool ok = true;
  for (const auto& r : gradcheck_suite(seed)) {
    os << r.model << " max_rel_error " << r.result.max_rel_error << " over " << r.result.coordinates
       << " parameters: " << (r.passed() ? "ok" : "FAIL") << "\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Probabilistic traffic forecasting and closed-loop provisioning"};
  app.name("ntnfc");
  app.require_subcommand(1);

  std::optional<std::string> spec, errors_out, name, mode;
  std::uint64_t seed = 0;
  std::string out_path, model, data, cfg, fc, policy = "point";
  EpochHour origin = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multi-beam traffic CSV");
  gen->add_option("--spec", spec, "Synthetic spec JSON (defaults if omitted)");
  gen->add_option("--seed", seed, "Random seed")->required();
  gen->add_option("--out", out_path, "Output CSV")->required();
  gen->footer(kSpecSchema);

  auto* tr = app.add_subcommand("train", "Train a forecaster and write a JSON checkpoint");
  tr->add_option("--model", model, "sff or lstm")->required()->check(CLI::IsMember({"sff", "lstm"}));
  tr->add_option("--data", data, "Traffic CSV")->required();
  tr->add_option("--config", cfg, "Train config JSON")->required();
  tr->add_option("--out", out_path, "Checkpoint path")->required();
  tr->footer(kTrainSchema);

  auto* fcst = app.add_subcommand("forecast", "Forecast every beam from one origin");
  fcst->add_option("--model", model, "Checkpoint JSON")->required();
  fcst->add_option("--data", data, "Traffic CSV")->required();
  fcst->add_option("--origin", origin, "Epoch hour of the first forecast step")->required();
  fcst->add_option("--out", out_path, "Forecast CSV")->required();

  auto* ev = app.add_subcommand("evaluate", "Score forecasts and audit the allocation policy");
  ev->add_option("--forecast", fc, "Forecast CSV")->required();
  ev->add_option("--data", data, "Traffic CSV with the realized values")->required();
  ev->add_option("--policy", policy, "point | quantile:p | headroom:f");
  ev->add_option("--name", name, "Model name in the report (default sff or lstm by file kind)");
  ev->add_option("--errors", errors_out, "Also write per-beam errors CSV");
  ev->add_option("--out", out_path, "Report JSON")->required();

  auto* sim = app.add_subcommand("simulate", "Run the closed-loop provisioning simulation");
  sim->add_option("--config", cfg, "Simulation config JSON")->required();
  sim->add_option("--mode", mode, "Override the config mode")->check(CLI::IsMember({"rolling", "replay"}));
  sim->add_option("--out", out_path, "Output directory")->required();
  sim->footer(kSimSchema);

  auto* gc = app.add_subcommand("gradcheck", "Check analytic gradients against central differences");
  gc->add_option("--seed", seed, "Seed for the toy problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  try {
    if (*gen) return detail::gen_data(spec, seed, out_path);
    if (*tr) return detail::train(model, data, cfg, out_path, out);
    if (*fcst) return detail::forecast(model, data, origin, out_path);
    if (*ev) return detail::evaluate(fc, data, policy, name, out_path, errors_out);
    if (*sim) return detail::simulate(cfg, out_path, mode, out);
    if (*gc) return detail::gradcheck(seed, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace ntnfc::cli
