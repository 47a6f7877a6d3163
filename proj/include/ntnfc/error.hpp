#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ntnfc {

enum class Errc {
  // input / configuration validation
  MissingColumn,
  MalformedRow,
  NonHourlyGap,
  NegativeValue,
  UnequalSeriesLength,
  EmptyDataset,
  InvalidConfig,
  WindowTooLong,
  InvalidProbability,
  IncompatiblePolicy,
  InsufficientHistory,
  EmptyTrainingSet,
  // runtime
  ShapeMismatch,
  EmptySequence,
  NonPositiveSigma,
  EmptyLog,
  Io,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonHourlyGap: return "NonHourlyGap";
    case Errc::NegativeValue: return "NegativeValue";
    case Errc::UnequalSeriesLength: return "UnequalSeriesLength";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::WindowTooLong: return "WindowTooLong";
    case Errc::InvalidProbability: return "InvalidProbability";
    case Errc::IncompatiblePolicy: return "IncompatiblePolicy";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::NonPositiveSigma: return "NonPositiveSigma";
    case Errc::EmptyLog: return "EmptyLog";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// True for errors caused by bad user input (data files, configs,
/// arguments). The CLI maps these to exit code 1 and everything else to 2.
constexpr bool is_validation_error(Errc c) noexcept {
  switch (c) {
    case Errc::ShapeMismatch:
    case Errc::EmptySequence:
    case Errc::NonPositiveSigma:
    case Errc::EmptyLog:
    case Errc::Io:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ntnfc
