#pragma once

// Closed-loop provisioning simulator. For every evaluation day it runs the
// rApp loop in order:
//
//   1-2  collect telemetry   history = every hour before the origin
//   3    window / split      training windows from that history
//   4    train or reuse      once up front, or every `retrain_every` days
//   5-6  predict             forecasts, plus ECDF percentiles 1..99 from
//                            sample paths for distributional models
//   7    decide              allocation plan from the model's policy
//   8    actuate             the plan is recorded (no wire protocol)
//   9    audit               plan vs realized traffic, metrics appended
//
// Forecasts at origin t only ever see hours < t.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ntnfc/decision.hpp"
#include "ntnfc/error.hpp"
#include "ntnfc/formats.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/lstm_forecaster.hpp"
#include "ntnfc/metrics.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/text_io.hpp"
#include "ntnfc/timeseries.hpp"

namespace ntnfc {

struct SyntheticSource {
  SyntheticSpec spec;
  std::uint64_t seed = 0;
};

struct CsvSource {
  std::filesystem::path path;
};

enum class SimMode { rolling, replay };

enum class QuantileSource { ecdf, closed_form };

struct SimConfig {
  std::variant<SyntheticSource, CsvSource> dataset = SyntheticSource{};
  std::vector<std::string> models{"sff", "lstm"};
  std::size_t context_len = kDefaultContext;
  std::size_t horizon = kDefaultHorizon;
  std::map<std::string, AllocationPolicy> policies;  // missing = point
  SimMode mode = SimMode::rolling;
  std::size_t n_eval_days = 1;
  std::optional<std::size_t> retrain_every;
  std::uint64_t seed = 0;
  SFFHyper sff;
  LSTMHyper lstm;
  std::size_t sff_train_stride = 1;
  std::size_t lstm_train_stride = 12;
  std::size_t n_sample_paths = 1000;
  QuantileSource quantile_source = QuantileSource::ecdf;
  bool record_wall_times = false;

  AllocationPolicy policy_for(const std::string& model) const {
    auto it = policies.find(model);
    return it == policies.end() ? AllocationPolicy::point() : it->second;
  }
};

inline constexpr std::size_t kCaseStudyBeams = 6;
inline constexpr std::size_t kCaseStudyDays = 8;

/// The analytic engine behind one model slot of the simulator.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  /// `history` holds only hours before the next origin.
  virtual void train(const Dataset& history) = 0;
  virtual Forecast predict(const std::string& beam_id, EpochHour origin, std::span<const double> context) const = 0;
  virtual std::vector<double> training_log() const { return {}; }
};

using ForecasterFactory = std::function<std::unique_ptr<Forecaster>(const std::string& model)>;

class SffForecaster final : public Forecaster {
 public:
  SffForecaster(SFFHyper hyper, std::size_t context_len, std::size_t horizon, std::size_t stride)
      : hyper_(std::move(hyper)), context_len_(context_len), horizon_(horizon), stride_(stride) {}

  void train(const Dataset& history) override {
    const auto windows = make_windows(history, context_len_, horizon_, stride_);
    model_ = train_sff(windows, hyper_, horizon_);
  }
  Forecast predict(const std::string& beam_id, EpochHour origin, std::span<const double> context) const override {
    return predict_sff(model(), context, beam_id, origin);
  }
  std::vector<double> training_log() const override { return model().training_log; }
  const SFFModel& model() const {
    if (!model_) throw Error(Errc::EmptyTrainingSet, "sff model used before training");
    return *model_;
  }

 private:
  SFFHyper hyper_;
  std::size_t context_len_, horizon_, stride_;
  std::optional<SFFModel> model_;
};

class LstmForecaster final : public Forecaster {
 public:
  LstmForecaster(LSTMHyper hyper, std::size_t context_len, std::size_t horizon, std::size_t stride)
      : hyper_(hyper), context_len_(context_len), horizon_(horizon), stride_(stride) {}

  void train(const Dataset& history) override {
    const auto windows = make_windows(history, context_len_, horizon_, stride_);
    model_ = train_lstm(windows, hyper_, horizon_);
  }
  Forecast predict(const std::string& beam_id, EpochHour origin, std::span<const double> context) const override {
    return predict_lstm(model(), context, beam_id, origin);
  }
  std::vector<double> training_log() const override { return model().training_log; }
  const LSTMModel& model() const {
    if (!model_) throw Error(Errc::EmptyTrainingSet, "lstm model used before training");
    return *model_;
  }

 private:
  LSTMHyper hyper_;
  std::size_t context_len_, horizon_, stride_;
  std::optional<LSTMModel> model_;
};

/// Model seeds derive from the simulation seed so one number pins a run.
inline ForecasterFactory default_factory(const SimConfig& cfg) {
  return [cfg](const std::string& model) -> std::unique_ptr<Forecaster> {
    if (model == "sff") {
      auto h = cfg.sff;
      h.seed = derive_seed(cfg.seed, "sff-model");
      return std::make_unique<SffForecaster>(h, cfg.context_len, cfg.horizon, cfg.sff_train_stride);
    }
    if (model == "lstm") {
      auto h = cfg.lstm;
      h.seed = derive_seed(cfg.seed, "lstm-model");
      return std::make_unique<LstmForecaster>(h, cfg.context_len, cfg.horizon, cfg.lstm_train_stride);
    }
    throw Error(Errc::InvalidConfig, "unknown model '" + model + "'");
  };
}

struct SimLog {
  SimMode mode = SimMode::rolling;
  std::vector<std::string> models;
  std::map<std::string, std::string> policies;
  std::vector<EpochHour> origins;                 // one per evaluation day
  std::vector<EvaluationRecord> records;          // sorted by (beam, day, model)
  std::vector<QuantileGrid> percentiles;          // distributional models, same order
  std::vector<std::string> percentile_models;     // model of each percentiles entry
  std::map<std::string, std::vector<std::vector<double>>> training_logs;  // per model, per training run
  std::map<std::string, std::size_t> phase_calls;
  std::map<std::string, double> wall_seconds;
  bool record_wall_times = false;

  double seconds_excluding_training() const {
    double s = 0.0;
    for (const auto& [phase, t] : wall_seconds)
      if (phase != "train") s += t;
    return s;
  }
};

inline void validate(const SimConfig& cfg) {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidConfig, "simulation config: " + what); };
  if (cfg.models.empty()) bad("at least one model is required");
  std::set<std::string> seen;
  for (const auto& m : cfg.models) {
    if (m != "sff" && m != "lstm") bad("unknown model '" + m + "'");
    if (!seen.insert(m).second) bad("model '" + m + "' listed twice");
  }
  for (const auto& [m, p] : cfg.policies) {
    if (!seen.count(m)) bad("policy given for model '" + m + "' which is not run");
    if (m == "lstm" && p.kind == AllocationPolicy::Kind::quantile)
      throw Error(Errc::IncompatiblePolicy, "the lstm model has no quantiles");
  }
  if (cfg.context_len < 1 || cfg.horizon < 1) bad("context_len and horizon must be >= 1");
  if (cfg.n_eval_days < 1) bad("n_eval_days must be >= 1");
  if (cfg.retrain_every && *cfg.retrain_every < 1) bad("retrain_every must be >= 1");
  if (cfg.n_sample_paths < 1) bad("n_sample_paths must be >= 1");
  if (cfg.sff_train_stride < 1 || cfg.lstm_train_stride < 1) bad("train strides must be >= 1");
}

inline Dataset load_dataset(const SimConfig& cfg) {
  return std::visit(
      [](const auto& src) -> Dataset {
        if constexpr (std::is_same_v<std::decay_t<decltype(src)>, SyntheticSource>)
          return generate_synthetic(src.spec, src.seed);
        else
          return load_csv(src.path);
      },
      cfg.dataset);
}

namespace detail {

class PhaseClock {
 public:
  explicit PhaseClock(SimLog& log) : log_(log) {}
  template <typename F>
  decltype(auto) run(const std::string& phase, F&& f) {
    ++log_.phase_calls[phase];
    const auto t0 = std::chrono::steady_clock::now();
    struct Stop {
      SimLog& log;
      const std::string& phase;
      std::chrono::steady_clock::time_point t0;
      ~Stop() { log.wall_seconds[phase] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
    } stop{log_, phase, t0};
    return f();
  }

 private:
  SimLog& log_;
};

}  // namespace detail

inline SimLog run_simulation(const SimConfig& cfg, const Dataset& ds, const ForecasterFactory& factory) {
  validate(cfg);
  validate(ds);
  const std::size_t H = cfg.horizon;
  const std::size_t days = cfg.mode == SimMode::replay ? 1 : cfg.n_eval_days;
  const EpochHour start = ds.start_time();
  const EpochHour end = start + static_cast<EpochHour>(ds.length());

  if (cfg.mode == SimMode::replay &&
      (ds.series.size() < kCaseStudyBeams || ds.length() < kCaseStudyDays * 24))
    throw Error(Errc::InsufficientHistory, "case-study replay needs >= 6 beams and >= 8 days of data");
  const auto span_needed = static_cast<EpochHour>(days * H);
  const EpochHour first_origin = end - span_needed;
  if (first_origin - start < static_cast<EpochHour>(cfg.context_len + H))
    throw Error(Errc::InsufficientHistory, "need at least context_len + horizon hours before the first origin (have " +
                                               std::to_string(std::max<EpochHour>(0, first_origin - start)) + ")");

  SimLog log;
  log.mode = cfg.mode;
  log.models = cfg.models;
  log.record_wall_times = cfg.record_wall_times;
  for (const auto& m : cfg.models) log.policies[m] = cfg.policy_for(m).to_string();
  detail::PhaseClock clock(log);

  std::map<std::string, std::unique_ptr<Forecaster>> engines;
  for (const auto& m : cfg.models) engines[m] = factory(m);
  const auto probs = percentile_probabilities();

  struct Pending {
    EvaluationRecord rec;
    std::optional<QuantileGrid> grid;
  };
  std::vector<Pending> pending;

  for (std::size_t day = 0; day < days; ++day) {
    const EpochHour origin = first_origin + static_cast<EpochHour>(day * H);
    log.origins.push_back(origin);

    // 1-2: telemetry up to (not including) the origin
    const Dataset history = clock.run("collect", [&] { return slice(ds, start, origin); });

    // 3-4: (re)train
    const bool retrain = day == 0 || (cfg.retrain_every && day % *cfg.retrain_every == 0);
    if (retrain) {
      for (const auto& m : cfg.models) {
        clock.run("train", [&] {
          engines[m]->train(history);
          return 0;
        });
        log.training_logs[m].push_back(engines[m]->training_log());
      }
    }

    for (const auto& s : history.series) {
      const std::span<const double> context(s.values.data() + s.values.size() - cfg.context_len, cfg.context_len);
      const auto* full = ds.find(s.beam_id);
      const std::span<const double> actual(full->values.data() + (origin - start), H);
      for (const auto& m : cfg.models) {
        // 5-6: forecast and percentiles
        Forecast f = clock.run("predict", [&] { return engines[m]->predict(s.beam_id, origin, context); });
        std::optional<QuantileGrid> grid;
        if (const auto* g = std::get_if<GaussianForecast>(&f)) {
          grid = clock.run("percentiles", [&] {
            const auto seed = beam_seed(derive_seed(cfg.seed, "paths-" + std::to_string(day)), s.beam_id);
            return ecdf_quantiles(sample_paths(*g, cfg.n_sample_paths, seed), probs, s.beam_id, origin);
          });
        }
        // 7: decide
        const auto policy = cfg.policy_for(m);
        AllocationPlan plan = clock.run("decide", [&] {
          if (grid && policy.kind == AllocationPolicy::Kind::quantile && cfg.quantile_source == QuantileSource::ecdf)
            return decide_allocation(DecisionInput{*grid}, policy);
          return decide_allocation(f, policy);
        });
        // 8: actuate
        clock.run("actuate", [&] {
          pending.push_back({{day, s.beam_id, m, f, {actual.begin(), actual.end()}, plan, {}, {}}, grid});
          return 0;
        });
        // 9: audit
        clock.run("audit", [&] {
          auto& rec = pending.back().rec;
          rec.outcome = account_provisioning(rec.plan, rec.actual);
          rec.metrics = evaluate_forecast(m, rec.forecast, rec.actual);
          return 0;
        });
      }
    }
  }

  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.rec.beam_id, a.rec.day) < std::tie(b.rec.beam_id, b.rec.day);
  });
  for (auto& p : pending) {
    if (p.grid) {
      log.percentiles.push_back(std::move(*p.grid));
      log.percentile_models.push_back(p.rec.model);
    }
    log.records.push_back(std::move(p.rec));
  }
  return log;
}

inline SimLog run_simulation(const SimConfig& cfg) {
  return run_simulation(cfg, load_dataset(cfg), default_factory(cfg));
}

/// Single-origin case study: the last `horizon` hours are held out, the
/// preceding `context_len` hours are the context and everything before the
/// origin is training history.
inline SimLog replay_case_study(SimConfig cfg) {
  cfg.mode = SimMode::replay;
  cfg.n_eval_days = 1;
  cfg.retrain_every.reset();
  return run_simulation(cfg);
}

// ---------------------------------------------------------------------------
// Output directory

inline std::map<std::string, std::string> simlog_files(const SimLog& log) {
  std::map<std::string, std::string> files;
  for (const auto& m : log.models) {
    std::string fc, alloc = std::string(kAllocationHeader) + "\n";
    bool gaussian = false;
    for (const auto& r : log.records) {
      if (r.model != m) continue;
      gaussian = std::holds_alternative<GaussianForecast>(r.forecast);
      std::visit([&](const auto& f) { append_forecast_rows(fc, f); }, r.forecast);
      append_allocation_rows(alloc, r.plan, r.actual);
    }
    files["forecasts_" + m + ".csv"] = std::string(gaussian ? kSffForecastHeader : kPointForecastHeader) + "\n" + fc;
    files["allocations_" + m + ".csv"] = alloc;

    std::string pct;
    for (std::size_t i = 0; i < log.percentiles.size(); ++i)
      if (log.percentile_models[i] == m) append_percentile_rows(pct, log.percentiles[i]);
    if (!pct.empty()) files["percentiles_" + m + ".csv"] = percentile_header() + "\n" + pct;
  }

  const auto summaries = summarize(log.records);
  auto report = report_json(summaries, log.policies);
  report["mode"] = log.mode == SimMode::replay ? "replay" : "rolling";
  report["origins"] = log.origins;
  report["horizon"] = log.records.empty() ? 0 : log.records.front().actual.size();
  files["report.json"] = report.dump(2) + "\n";
  files["errors.csv"] = errors_csv(summaries);

  nlohmann::json timings = {{"phase_calls", log.phase_calls}};
  if (log.record_wall_times) timings["wall_seconds"] = log.wall_seconds;
  files["timings.json"] = timings.dump(2) + "\n";
  files["training_log.json"] = nlohmann::json(log.training_logs).dump(1) + "\n";
  return files;
}

/// Writes every file into a staging directory first, then moves them into
/// `dir`; other files already in `dir` are left alone.
inline void write_simlog(const SimLog& log, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto files = simlog_files(log);
  auto staging = dir;
  staging += ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging);
  for (const auto& [name, content] : files) text::write_file_atomic(staging / name, content);
  fs::create_directories(dir);
  for (const auto& [name, content] : files) {
    fs::rename(staging / name, dir / name, ec);
    if (ec) throw Error(Errc::Io, "cannot move " + name + " into " + dir.string());
  }
  fs::remove_all(staging, ec);
}

}  // namespace ntnfc
