#pragma once

// Model checkpoints as JSON:
//
//   {
//     "format": "ntnfc-checkpoint", "version": 1,
//     "model": "sff" | "lstm",
//     "config": { "context_len", "horizon", "input_dim", "output_dim",
//                 "hidden_dims" (sff) | "hidden_dim" (lstm),
//                 "activation" (sff), "normalization" },
//     "hyper": { "epochs", "batch_size", "lr", "weight_decay" },
//     "seed": <uint64>,
//     "params": [ { "name", "shape": [rows, cols], "data": [...] } ],
//     "training_log": [ per-epoch mean loss ]
//   }

#include <filesystem>
#include <string>
#include <variant>

#include <json.hpp>

#include "ntnfc/error.hpp"
#include "ntnfc/lstm_forecaster.hpp"
#include "ntnfc/nn.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/text_io.hpp"

namespace ntnfc {

using Json = nlohmann::json;
using AnyModel = std::variant<SFFModel, LSTMModel>;

inline constexpr const char* kCheckpointFormat = "ntnfc-checkpoint";

namespace detail {

inline Json params_to_json(const nn::ParamStore& p) {
  Json arr = Json::array();
  for (const auto& t : p.tensors())
    arr.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"data", t.data}});
  return arr;
}

inline void params_from_json(const Json& arr, nn::ParamStore& expected) {
  if (!arr.is_array() || arr.size() != expected.tensors().size())
    throw Error(Errc::InvalidConfig, "checkpoint params do not match the model configuration");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto& t = expected[i];
    const auto& j = arr[i];
    if (j.at("name").get<std::string>() != t.name || j.at("shape").at(0).get<std::size_t>() != t.rows ||
        j.at("shape").at(1).get<std::size_t>() != t.cols)
      throw Error(Errc::InvalidConfig, "checkpoint tensor '" + t.name + "' has the wrong name or shape");
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != t.size()) throw Error(Errc::InvalidConfig, "checkpoint tensor '" + t.name + "' is truncated");
    t.data = std::move(data);
  }
  if (!expected.all_finite()) throw Error(Errc::InvalidConfig, "checkpoint contains non-finite parameters");
}

}  // namespace detail

inline Json to_json(const SFFModel& m) {
  return {{"format", kCheckpointFormat},
          {"version", 1},
          {"model", "sff"},
          {"config",
           {{"context_len", m.context_len},
            {"horizon", m.horizon},
            {"input_dim", m.config.input_dim},
            {"hidden_dims", m.config.hidden_dims},
            {"output_dim", m.config.output_dim},
            {"activation", "relu"},
            {"normalization", m.normalization}}},
          {"hyper",
           {{"epochs", m.hyper.epochs},
            {"batch_size", m.hyper.batch_size},
            {"lr", m.hyper.lr},
            {"weight_decay", m.hyper.weight_decay}}},
          {"seed", m.hyper.seed},
          {"params", detail::params_to_json(m.params)},
          {"training_log", m.training_log}};
}

inline Json to_json(const LSTMModel& m) {
  return {{"format", kCheckpointFormat},
          {"version", 1},
          {"model", "lstm"},
          {"config",
           {{"context_len", m.context_len},
            {"horizon", m.horizon},
            {"input_dim", m.config.input_dim},
            {"hidden_dim", m.config.hidden_dim},
            {"output_dim", m.config.output_dim},
            {"normalization", m.normalization}}},
          {"hyper",
           {{"epochs", m.hyper.epochs},
            {"batch_size", m.hyper.batch_size},
            {"lr", m.hyper.lr},
            {"weight_decay", m.hyper.weight_decay}}},
          {"seed", m.hyper.seed},
          {"params", detail::params_to_json(m.params)},
          {"training_log", m.training_log}};
}

inline Json to_json(const AnyModel& m) {
  return std::visit([](const auto& x) { return to_json(x); }, m);
}

inline AnyModel model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat || j.at("version").get<int>() != 1)
      throw Error(Errc::InvalidConfig, "not an ntnfc checkpoint (version 1)");
    const auto kind = j.at("model").get<std::string>();
    const auto& c = j.at("config");
    const auto& h = j.at("hyper");
    if (c.at("normalization").get<std::string>() != kNormalizationTag)
      throw Error(Errc::InvalidConfig, "unsupported normalization policy");
    if (kind == "sff") {
      SFFModel m;
      m.context_len = c.at("context_len").get<std::size_t>();
      m.horizon = c.at("horizon").get<std::size_t>();
      m.config = {c.at("input_dim").get<std::size_t>(), c.at("hidden_dims").get<std::vector<std::size_t>>(),
                  c.at("output_dim").get<std::size_t>(), nn::Activation::relu};
      if (c.at("activation").get<std::string>() != "relu")
        throw Error(Errc::InvalidConfig, "unsupported activation");
      if (m.config.input_dim != m.context_len || m.config.output_dim != 2 * m.horizon)
        throw Error(Errc::InvalidConfig, "sff config is inconsistent (need input=context, output=2*horizon)");
      m.hyper = {h.at("epochs").get<std::size_t>(), h.at("batch_size").get<std::size_t>(), h.at("lr").get<double>(),
                 h.at("weight_decay").get<double>(), j.at("seed").get<std::uint64_t>(), m.config.hidden_dims};
      m.params = nn::init_params(m.config, 0);
      detail::params_from_json(j.at("params"), m.params);
      m.training_log = j.at("training_log").get<std::vector<double>>();
      return m;
    }
    if (kind == "lstm") {
      LSTMModel m;
      m.context_len = c.at("context_len").get<std::size_t>();
      m.horizon = c.at("horizon").get<std::size_t>();
      m.config = {c.at("input_dim").get<std::size_t>(), c.at("hidden_dim").get<std::size_t>(),
                  c.at("output_dim").get<std::size_t>()};
      if (m.config.input_dim != 1 || m.config.output_dim != m.horizon)
        throw Error(Errc::InvalidConfig, "lstm config is inconsistent (need input=1, output=horizon)");
      m.hyper = {h.at("epochs").get<std::size_t>(), h.at("batch_size").get<std::size_t>(), h.at("lr").get<double>(),
                 h.at("weight_decay").get<double>(), j.at("seed").get<std::uint64_t>(), m.config.hidden_dim};
      m.params = nn::init_params(m.config, 0);
      detail::params_from_json(j.at("params"), m.params);
      m.training_log = j.at("training_log").get<std::vector<double>>();
      return m;
    }
    throw Error(Errc::InvalidConfig, "unknown model kind '" + kind + "'");
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const AnyModel& m, const std::filesystem::path& path) {
  text::write_file_atomic(path, to_json(m).dump(1) + "\n");
}

inline AnyModel load_checkpoint(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(text::read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace ntnfc
