#pragma once

// JSON configuration documents. Every object is checked strictly: unknown
// keys and wrongly typed values are rejected before any work starts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntnfc/decision.hpp"
#include "ntnfc/error.hpp"
#include "ntnfc/lstm_forecaster.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/sim.hpp"
#include "ntnfc/text_io.hpp"
#include "ntnfc/timeseries.hpp"

namespace ntnfc::config {

using Json = nlohmann::json;

/// Reads one JSON object, remembering which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!has(key)) fail("missing required key '" + key + "'");
    return convert<T>(key);
  }

  const Json& object(const std::string& key) {
    used_.insert(key);
    if (!has(key) || !j_.at(key).is_object()) fail("'" + key + "' must be an object");
    return j_.at(key);
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) fail("unknown key '" + it.key() + "'");
  }

  [[noreturn]] void fail(const std::string& what) const { throw Error(Errc::InvalidConfig, where_ + ": " + what); }

 private:
  template <typename T>
  T convert(const std::string& key) {
    const Json& v = j_.at(key);
    const auto type_error = [&](const char* want) { fail("'" + key + "' must be " + want); };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) type_error("a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) type_error("a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned()))
        type_error("a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) type_error("a number");
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) type_error("an array of numbers");
      for (const auto& e : v)
        if (!e.is_number()) type_error("an array of numbers");
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) type_error("an array of non-negative integers");
      for (const auto& e : v)
        if (!e.is_number_unsigned()) type_error("an array of non-negative integers");
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) type_error("an array of strings");
      for (const auto& e : v)
        if (!e.is_string()) type_error("an array of strings");
    }
    return v.get<T>();
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

inline Json parse_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(text::read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidConfig, path.string() + " is not valid JSON: " + e.what());
  }
}

inline SyntheticSpec synthetic_spec_from_json(const Json& j) {
  ObjectReader r(j, "synthetic spec");
  SyntheticSpec s;
  s.n_beams = r.get("n_beams", s.n_beams);
  s.n_days = r.get("n_days", s.n_days);
  s.base_load = r.get("base_load", s.base_load);
  s.diurnal_amplitude = r.get("diurnal_amplitude", s.diurnal_amplitude);
  s.weekly_amplitude = r.get("weekly_amplitude", s.weekly_amplitude);
  s.noise_ar_coeff = r.get("noise_ar_coeff", s.noise_ar_coeff);
  s.noise_std = r.get("noise_std", s.noise_std);
  s.burst_rate = r.get("burst_rate", s.burst_rate);
  s.burst_scale = r.get("burst_scale", s.burst_scale);
  s.burst_decay_hours = r.get("burst_decay_hours", s.burst_decay_hours);
  s.phase_offsets = r.get("phase_offsets", s.phase_offsets);
  s.start_time = r.get<std::int64_t>("start_time", s.start_time);
  r.finish();
  validate(s);
  return s;
}

inline Json to_json(const SyntheticSpec& s) {
  return {{"n_beams", s.n_beams},
          {"n_days", s.n_days},
          {"base_load", s.base_load},
          {"diurnal_amplitude", s.diurnal_amplitude},
          {"weekly_amplitude", s.weekly_amplitude},
          {"noise_ar_coeff", s.noise_ar_coeff},
          {"noise_std", s.noise_std},
          {"burst_rate", s.burst_rate},
          {"burst_scale", s.burst_scale},
          {"burst_decay_hours", s.burst_decay_hours},
          {"phase_offsets", s.phase_offsets},
          {"start_time", s.start_time}};
}

namespace detail {

inline void read_common_hyper(ObjectReader& r, std::size_t& epochs, std::size_t& batch, double& lr, double& wd) {
  epochs = r.get("epochs", epochs);
  batch = r.get("batch_size", batch);
  lr = r.get("lr", lr);
  wd = r.get("weight_decay", wd);
  if (batch < 1) r.fail("batch_size must be >= 1");
  if (!(lr > 0.0)) r.fail("lr must be > 0");
  if (!(wd >= 0.0)) r.fail("weight_decay must be >= 0");
}

inline SFFHyper read_sff_hyper(ObjectReader& r) {
  SFFHyper h;
  read_common_hyper(r, h.epochs, h.batch_size, h.lr, h.weight_decay);
  h.hidden_dims = r.get("hidden_dims", h.hidden_dims);
  for (auto d : h.hidden_dims)
    if (d < 1) r.fail("hidden_dims entries must be >= 1");
  return h;
}

inline LSTMHyper read_lstm_hyper(ObjectReader& r) {
  LSTMHyper h;
  read_common_hyper(r, h.epochs, h.batch_size, h.lr, h.weight_decay);
  h.hidden_dim = r.get("hidden_dim", h.hidden_dim);
  if (h.hidden_dim < 1) r.fail("hidden_dim must be >= 1");
  return h;
}

}  // namespace detail

/// `train` subcommand configuration.
struct TrainConfig {
  std::size_t context_len = kDefaultContext;
  std::size_t horizon = kDefaultHorizon;
  std::size_t stride = 1;
  std::optional<EpochHour> train_until;  // only windows ending before this hour
  SFFHyper sff;
  LSTMHyper lstm;
};

inline TrainConfig train_config_from_json(const Json& j, const std::string& model) {
  ObjectReader r(j, "train config");
  TrainConfig c;
  c.context_len = r.get("context_len", c.context_len);
  c.horizon = r.get("horizon", c.horizon);
  c.stride = r.get("stride", model == "lstm" ? std::size_t{12} : std::size_t{1});
  if (r.has("train_until")) c.train_until = r.get<std::int64_t>("train_until", 0);
  else r.get<std::int64_t>("train_until", 0);
  const auto seed = r.require<std::uint64_t>("seed");
  if (model == "sff") {
    c.sff = detail::read_sff_hyper(r);
    c.sff.seed = seed;
  } else if (model == "lstm") {
    c.lstm = detail::read_lstm_hyper(r);
    c.lstm.seed = seed;
  } else {
    r.fail("unknown model '" + model + "'");
  }
  if (c.context_len < 1 || c.horizon < 1 || c.stride < 1) r.fail("context_len, horizon and stride must be >= 1");
  r.finish();
  return c;
}

inline SimConfig sim_config_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  ObjectReader r(j, "simulation config");
  SimConfig c;
  c.seed = r.require<std::uint64_t>("seed");

  {
    ObjectReader d(r.object("dataset"), "dataset");
    if (d.has("synthetic") == d.has("csv")) d.fail("give exactly one of 'synthetic' or 'csv'");
    if (d.has("synthetic")) {
      SyntheticSource src;
      src.spec = synthetic_spec_from_json(d.object("synthetic"));
      src.seed = d.get("seed", c.seed);
      c.dataset = src;
    } else {
      std::filesystem::path p = d.require<std::string>("csv");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      c.dataset = CsvSource{p};
    }
    d.finish();
  }

  c.models = r.get("models", c.models);
  const auto mode = r.get<std::string>("mode", "rolling");
  if (mode == "rolling") c.mode = SimMode::rolling;
  else if (mode == "replay") c.mode = SimMode::replay;
  else r.fail("mode must be 'rolling' or 'replay'");
  c.context_len = r.get("context_len", c.context_len);
  c.horizon = r.get("horizon", c.horizon);
  c.n_eval_days = r.get("n_eval_days", c.n_eval_days);
  if (r.has("retrain_every")) c.retrain_every = r.get<std::size_t>("retrain_every", 1);
  else r.get<std::size_t>("retrain_every", 0);

  if (r.has("policies")) {
    const Json& pj = r.object("policies");
    for (auto it = pj.begin(); it != pj.end(); ++it) {
      if (!it.value().is_string()) r.fail("policies must map model names to policy strings");
      c.policies[it.key()] = AllocationPolicy::parse(it.value().get<std::string>());
    }
  } else {
    r.get<std::string>("policies", "");
  }

  if (r.has("sff")) {
    ObjectReader s(r.object("sff"), "sff");
    c.sff = detail::read_sff_hyper(s);
    c.sff_train_stride = s.get("train_stride", c.sff_train_stride);
    s.finish();
  } else {
    r.get<std::string>("sff", "");
  }
  if (r.has("lstm")) {
    ObjectReader s(r.object("lstm"), "lstm");
    c.lstm = detail::read_lstm_hyper(s);
    c.lstm_train_stride = s.get("train_stride", c.lstm_train_stride);
    s.finish();
  } else {
    r.get<std::string>("lstm", "");
  }

  c.n_sample_paths = r.get("n_sample_paths", c.n_sample_paths);
  const auto qs = r.get<std::string>("quantile_source", "ecdf");
  if (qs == "ecdf") c.quantile_source = QuantileSource::ecdf;
  else if (qs == "closed_form") c.quantile_source = QuantileSource::closed_form;
  else r.fail("quantile_source must be 'ecdf' or 'closed_form'");
  c.record_wall_times = r.get("record_wall_times", c.record_wall_times);
  r.finish();
  validate(c);
  return c;
}

/// The canonical synthetic benchmark: 6 beams, 38 days, generator
/// defaults, both models, seed 42, four rolling evaluation days.
inline SimConfig benchmark_config() {
  SimConfig c;
  c.seed = 42;
  c.dataset = SyntheticSource{SyntheticSpec{}, 42};
  c.n_eval_days = 4;
  return c;
}

}  // namespace ntnfc::config
