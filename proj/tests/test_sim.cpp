#include <gtest/gtest.h>

#include <filesystem>

#include "ntnfc/checkpoint.hpp"
#include "ntnfc/sim.hpp"

using namespace ntnfc;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an ntnfc::Error";
  return Errc::Io;
}

// Knows the whole series; reads the future directly.
class OracleForecaster final : public Forecaster {
 public:
  OracleForecaster(const Dataset& ds, std::size_t H, bool gaussian) : ds_(ds), H_(H), gaussian_(gaussian) {}
  void train(const Dataset&) override {}
  Forecast predict(const std::string& beam, EpochHour origin, std::span<const double>) const override {
    const auto* s = ds_.find(beam);
    std::vector<double> v(s->values.begin() + (origin - s->start_time), s->values.begin() + (origin - s->start_time) + H_);
    if (gaussian_) return GaussianForecast{beam, origin, v, std::vector<double>(H_, 1e-9)};
    return PointForecast{beam, origin, v};
  }

 private:
  const Dataset& ds_;
  std::size_t H_;
  bool gaussian_;
};

struct SpyState {
  EpochHour latest_train_hour = -1;
  std::vector<EpochHour> train_ends;
  std::vector<std::pair<EpochHour, std::vector<double>>> contexts;
};

// Repeats the last context value and remembers everything it was shown.
class SpyForecaster final : public Forecaster {
 public:
  explicit SpyForecaster(SpyState& st) : st_(st) {}
  void train(const Dataset& history) override {
    const EpochHour end = history.start_time() + static_cast<EpochHour>(history.length());
    st_.latest_train_hour = std::max(st_.latest_train_hour, end - 1);
    st_.train_ends.push_back(end);
  }
  Forecast predict(const std::string& beam, EpochHour origin, std::span<const double> ctx) const override {
    st_.contexts.emplace_back(origin, std::vector<double>(ctx.begin(), ctx.end()));
    return PointForecast{beam, origin, std::vector<double>(24, ctx.back())};
  }

 private:
  SpyState& st_;
};

SimConfig small_config() {
  SimConfig c;
  c.seed = 3;
  c.context_len = 24;
  c.horizon = 24;
  c.n_eval_days = 2;
  c.dataset = SyntheticSource{SyntheticSpec{.n_beams = 2, .n_days = 6}, 3};
  c.sff.epochs = 3;
  c.sff.hidden_dims = {8, 8};
  c.lstm.epochs = 2;
  c.lstm.hidden_dim = 4;
  c.sff_train_stride = 6;
  c.lstm_train_stride = 12;
  c.n_sample_paths = 200;
  return c;
}

}  // namespace

TEST(Simulation, RecordCountAndOrder) {
  const auto cfg = small_config();
  const auto log = run_simulation(cfg);
  ASSERT_EQ(log.records.size(), 2u * 2u * 2u);
  EXPECT_EQ(log.origins, (std::vector<EpochHour>{96, 120}));
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const auto& a = log.records[i - 1];
    const auto& b = log.records[i];
    EXPECT_LE(std::tie(a.beam_id, a.day), std::tie(b.beam_id, b.day));
  }
  EXPECT_EQ(log.percentiles.size(), 4u);
  for (const auto& m : log.percentile_models) EXPECT_EQ(m, "sff");
  EXPECT_EQ(log.training_logs.at("sff").size(), 1u);
  EXPECT_EQ(log.training_logs.at("sff")[0].size(), 3u);
  EXPECT_EQ(log.phase_calls.at("train"), 2u);
  EXPECT_EQ(log.phase_calls.at("predict"), 8u);
}

TEST(Simulation, OracleForecasterIsAlwaysExact) {
  auto cfg = small_config();
  const auto ds = load_dataset(cfg);
  const auto log = run_simulation(cfg, ds, [&](const std::string& m) -> std::unique_ptr<Forecaster> {
    return std::make_unique<OracleForecaster>(ds, cfg.horizon, m == "sff");
  });
  const auto s = summarize(log.records);
  for (const auto& [model, sum] : s) {
    EXPECT_EQ(sum.pooled.mae, 0.0) << model;
    EXPECT_EQ(sum.provisioning.exact_count, sum.points);
    EXPECT_EQ(sum.provisioning.over_rate, 0.0);
    EXPECT_EQ(sum.provisioning.under_rate, 0.0);
  }
}

TEST(Simulation, NoLookAhead) {
  auto cfg = small_config();
  cfg.models = {"lstm"};
  cfg.retrain_every = 1;
  cfg.n_eval_days = 3;
  const auto ds = load_dataset(cfg);
  SpyState st;
  const auto log = run_simulation(cfg, ds, [&](const std::string&) { return std::make_unique<SpyForecaster>(st); });
  EXPECT_EQ(st.train_ends, log.origins);
  // every context equals the 24 hours immediately before its origin for some beam
  for (const auto& [origin, ctx] : st.contexts) {
    ASSERT_EQ(ctx.size(), 24u);
    bool found = false;
    for (const auto& s : ds.series)
      found |= std::equal(ctx.begin(), ctx.end(), s.values.begin() + (origin - s.start_time - 24));
    EXPECT_TRUE(found);
  }
  EXPECT_LT(st.latest_train_hour, log.origins.back());
}

TEST(Simulation, FuturePerturbationDoesNotChangeForecasts) {
  auto cfg = small_config();
  cfg.n_eval_days = 1;
  const auto ds = load_dataset(cfg);
  auto perturbed = ds;
  const std::size_t origin_idx = ds.length() - cfg.horizon;
  for (auto& s : perturbed.series)
    for (std::size_t t = origin_idx; t < s.values.size(); ++t) s.values[t] = s.values[t] * 3 + 50;
  const auto a = run_simulation(cfg, ds, default_factory(cfg));
  const auto b = run_simulation(cfg, perturbed, default_factory(cfg));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].forecast, b.records[i].forecast);
    EXPECT_EQ(a.records[i].plan, b.records[i].plan);
    EXPECT_NE(a.records[i].actual, b.records[i].actual);
  }
}

TEST(Simulation, RetrainEvery) {
  auto cfg = small_config();
  cfg.models = {"lstm"};
  cfg.n_eval_days = 3;
  cfg.retrain_every = 2;
  const auto ds = load_dataset(cfg);
  SpyState st;
  const auto log = run_simulation(cfg, ds, [&](const std::string&) { return std::make_unique<SpyForecaster>(st); });
  EXPECT_EQ(st.train_ends, (std::vector<EpochHour>{log.origins[0], log.origins[2]}));
  cfg.retrain_every.reset();
  SpyState once;
  run_simulation(cfg, ds, [&](const std::string&) { return std::make_unique<SpyForecaster>(once); });
  EXPECT_EQ(once.train_ends.size(), 1u);
}

TEST(Simulation, InsufficientHistory) {
  auto cfg = small_config();
  cfg.n_eval_days = 5;  // 6 days of data, 5 held out leaves 24h < C + H
  EXPECT_EQ(code_of([&] { run_simulation(cfg); }), Errc::InsufficientHistory);
}

TEST(Simulation, ReplayNeedsCaseStudyShape) {
  auto cfg = small_config();
  EXPECT_EQ(code_of([&] { replay_case_study(cfg); }), Errc::InsufficientHistory);
  cfg.dataset = SyntheticSource{SyntheticSpec{.n_beams = 6, .n_days = 7}, 3};
  EXPECT_EQ(code_of([&] { replay_case_study(cfg); }), Errc::InsufficientHistory);
}

TEST(Simulation, ReplayIsSingleOriginPerBeam) {
  auto cfg = small_config();
  cfg.dataset = SyntheticSource{SyntheticSpec{.n_beams = 6, .n_days = 8}, 3};
  cfg.n_eval_days = 4;
  const auto log = replay_case_study(cfg);
  EXPECT_EQ(log.mode, SimMode::replay);
  ASSERT_EQ(log.origins.size(), 1u);
  EXPECT_EQ(log.origins[0], 7 * 24);
  EXPECT_EQ(log.records.size(), 12u);
}

TEST(Simulation, LstmQuantilePolicyIsIncompatible) {
  auto cfg = small_config();
  cfg.policies["lstm"] = AllocationPolicy::quantile(0.9);
  EXPECT_EQ(code_of([&] { run_simulation(cfg); }), Errc::IncompatiblePolicy);
}

TEST(Simulation, ConfigValidation) {
  auto cfg = small_config();
  cfg.models = {"sff", "sff"};
  EXPECT_EQ(code_of([&] { run_simulation(cfg); }), Errc::InvalidConfig);
  cfg = small_config();
  cfg.policies["sff"] = AllocationPolicy::point();
  cfg.models = {"lstm"};
  EXPECT_EQ(code_of([&] { run_simulation(cfg); }), Errc::InvalidConfig);
}

TEST(Simulation, EcdfAndClosedFormQuantilePoliciesAgreeRoughly) {
  auto cfg = small_config();
  cfg.models = {"sff"};
  cfg.policies["sff"] = AllocationPolicy::quantile(0.9);
  cfg.n_sample_paths = 4000;
  const auto e = run_simulation(cfg);
  cfg.quantile_source = QuantileSource::closed_form;
  const auto c = run_simulation(cfg);
  ASSERT_EQ(e.records.size(), c.records.size());
  for (std::size_t i = 0; i < e.records.size(); ++i) {
    const auto& g = std::get<GaussianForecast>(c.records[i].forecast);
    for (std::size_t t = 0; t < g.mu.size(); ++t)
      EXPECT_NEAR(e.records[i].plan.amounts[t], c.records[i].plan.amounts[t], 0.1 * g.sigma[t] + 1e-9);
  }
}

TEST(SimulationOutput, DeterministicFiles) {
  const auto cfg = small_config();
  const auto a = simlog_files(run_simulation(cfg));
  const auto b = simlog_files(run_simulation(cfg));
  EXPECT_EQ(a, b);
}

TEST(SimulationOutput, FileSetAndHeaders) {
  auto cfg = small_config();
  cfg.policies["sff"] = AllocationPolicy::quantile(0.9);
  const auto files = simlog_files(run_simulation(cfg));
  std::vector<std::string> names;
  for (const auto& [n, _] : files) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"allocations_lstm.csv", "allocations_sff.csv", "errors.csv",
                                             "forecasts_lstm.csv", "forecasts_sff.csv", "percentiles_sff.csv",
                                             "report.json", "timings.json", "training_log.json"}));
  auto first_line = [&](const std::string& n) { return files.at(n).substr(0, files.at(n).find('\n')); };
  EXPECT_EQ(first_line("forecasts_sff.csv"), kSffForecastHeader);
  EXPECT_EQ(first_line("forecasts_lstm.csv"), kPointForecastHeader);
  EXPECT_EQ(first_line("percentiles_sff.csv"), percentile_header());
  // 2 beams x 2 days x 24 steps, plus header
  EXPECT_EQ(std::count(files.at("forecasts_sff.csv").begin(), files.at("forecasts_sff.csv").end(), '\n'), 97);
  EXPECT_EQ(std::count(files.at("percentiles_sff.csv").begin(), files.at("percentiles_sff.csv").end(), '\n'), 97);

  const auto report = Json::parse(files.at("report.json"));
  EXPECT_EQ(report["mode"], "rolling");
  EXPECT_EQ(report["horizon"], 24);
  EXPECT_EQ(report["models"]["sff"]["policy"], "quantile:0.9");
  const double over = report["provisioning_split"]["sff"]["over"];
  const double under = report["provisioning_split"]["sff"]["under"];
  EXPECT_DOUBLE_EQ(over + under, 1.0);
  EXPECT_FALSE(Json::parse(files.at("timings.json")).contains("wall_seconds"));
}

TEST(SimulationOutput, WallTimesAreOptIn) {
  auto cfg = small_config();
  cfg.models = {"lstm"};
  cfg.record_wall_times = true;
  const auto log = run_simulation(cfg);
  const auto t = Json::parse(simlog_files(log).at("timings.json"));
  ASSERT_TRUE(t.contains("wall_seconds"));
  EXPECT_TRUE(t["wall_seconds"].contains("train"));
  EXPECT_GE(log.seconds_excluding_training(), 0.0);
}

TEST(SimulationOutput, WriteSimlog) {
  auto cfg = small_config();
  cfg.models = {"lstm"};
  const auto log = run_simulation(cfg);
  const auto dir = fs::temp_directory_path() / "ntnfc_sim_out";
  fs::remove_all(dir);
  fs::create_directories(dir);
  text::write_file_atomic(dir / "keep.txt", "x");
  write_simlog(log, dir);
  const auto files = simlog_files(log);
  for (const auto& [name, content] : files) EXPECT_EQ(text::read_file(dir / name), content) << name;
  EXPECT_TRUE(fs::exists(dir / "keep.txt"));
  EXPECT_FALSE(fs::exists(dir.string() + ".partial"));
  EXPECT_FALSE(fs::exists(dir / "percentiles_lstm.csv"));
}
