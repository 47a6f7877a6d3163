#pragma once

// Hourly multi-beam traffic data: the data model, CSV ingestion, the
// synthetic generator, sliding-window extraction and per-window scaling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntnfc/error.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/text_io.hpp"

namespace ntnfc {

/// Hour index since 1970-01-01T00:00Z.
using EpochHour = std::int64_t;

struct TrafficSeries {
  std::string beam_id;
  EpochHour start_time = 0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  EpochHour end_time() const noexcept { return start_time + static_cast<EpochHour>(values.size()); }
};

/// One series per beam, sorted by beam_id, all aligned on the same hours.
struct Dataset {
  std::vector<TrafficSeries> series;

  std::size_t length() const noexcept { return series.empty() ? 0 : series.front().size(); }
  EpochHour start_time() const noexcept { return series.empty() ? 0 : series.front().start_time; }
  const TrafficSeries* find(std::string_view beam_id) const {
    for (const auto& s : series)
      if (s.beam_id == beam_id) return &s;
    return nullptr;
  }
};

struct ForecastWindow {
  std::string beam_id;
  EpochHour origin_time = 0;  // hour of the first horizon step
  std::vector<double> context;
  std::vector<double> horizon_truth;
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

inline constexpr double kStdFloor = 1e-6;
inline constexpr std::size_t kDefaultContext = 168;
inline constexpr std::size_t kDefaultHorizon = 24;

struct SyntheticSpec {
  std::size_t n_beams = 6;
  std::size_t n_days = 38;
  double base_load = 100.0;
  double diurnal_amplitude = 40.0;
  double weekly_amplitude = 10.0;
  double noise_ar_coeff = 0.7;
  double noise_std = 6.0;
  double burst_rate = 0.3;        // expected bursts per beam per day
  double burst_scale = 25.0;      // mean burst height
  double burst_decay_hours = 4.0; // e-folding time of a burst
  std::vector<double> phase_offsets;  // hours, one per beam; empty = evenly spread
  EpochHour start_time = 0;
};

/// Throws if any series or dataset invariant is broken.
inline void validate(const Dataset& ds) {
  if (ds.series.empty()) throw Error(Errc::EmptyDataset, "dataset has no series");
  const auto& first = ds.series.front();
  for (std::size_t i = 0; i < ds.series.size(); ++i) {
    const auto& s = ds.series[i];
    if (s.values.empty()) throw Error(Errc::EmptyDataset, "series '" + s.beam_id + "' is empty");
    for (double v : s.values) {
      if (!std::isfinite(v)) throw Error(Errc::NegativeValue, "non-finite value in '" + s.beam_id + "'");
      if (v < 0.0) throw Error(Errc::NegativeValue, "negative value in '" + s.beam_id + "'");
    }
    if (s.size() != first.size() || s.start_time != first.start_time)
      throw Error(Errc::UnequalSeriesLength,
                  "series '" + s.beam_id + "' is not aligned with '" + first.beam_id + "'");
    if (i > 0 && !(ds.series[i - 1].beam_id < s.beam_id))
      throw Error(Errc::InvalidConfig, "beam ids must be unique and sorted");
  }
}

namespace detail {

constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

/// Accepts "YYYY-MM-DDTHH[:MM[:SS]][Z]" (or a space for 'T'); minutes and
/// seconds must be zero.
inline std::optional<EpochHour> parse_iso_hour(std::string_view s) {
  int y, mo, d, h, mi = 0, sec = 0;
  if (!parse_fixed(s, 0, 4, y) || s.size() < 13 || s[4] != '-' || s[7] != '-' ||
      !parse_fixed(s, 5, 2, mo) || !parse_fixed(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
      !parse_fixed(s, 11, 2, h))
    return std::nullopt;
  std::size_t pos = 13;
  if (pos < s.size() && s[pos] == ':') {
    if (!parse_fixed(s, pos + 1, 2, mi)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && s[pos] == ':') {
      if (!parse_fixed(s, pos + 1, 2, sec)) return std::nullopt;
      pos += 3;
    }
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi != 0 || sec != 0) return std::nullopt;
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 24 + h;
}

}  // namespace detail

/// Parses the `timestamp,beam_id,traffic` format. Rows may come in any
/// order; each beam must cover consecutive hours with no gaps.
inline Dataset parse_csv(std::string_view text) {
  std::size_t line_no = 0;
  std::map<std::string, std::vector<std::pair<EpochHour, double>>, std::less<>> rows;
  bool header_seen = false;

  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text::trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto cells = text::split(line);
    if (!header_seen) {
      if (cells.size() != 3 || cells[0] != "timestamp" || cells[1] != "beam_id" || cells[2] != "traffic")
        throw Error(Errc::MissingColumn, "header must be exactly 'timestamp,beam_id,traffic'");
      header_seen = true;
      continue;
    }
    const std::string where = " at line " + std::to_string(line_no);
    if (cells.size() != 3) throw Error(Errc::MalformedRow, "expected 3 fields" + where);
    EpochHour ts;
    if (!text::parse_int(cells[0], ts)) {
      auto iso = detail::parse_iso_hour(cells[0]);
      if (!iso) throw Error(Errc::MalformedRow, "bad timestamp '" + std::string(cells[0]) + "'" + where);
      ts = *iso;
    }
    if (cells[1].empty()) throw Error(Errc::MalformedRow, "empty beam_id" + where);
    double v;
    if (!text::parse_double(cells[2], v) || !std::isfinite(v))
      throw Error(Errc::MalformedRow, "bad traffic value" + where);
    if (v < 0.0) throw Error(Errc::NegativeValue, "negative traffic" + where);
    rows[std::string(cells[1])].emplace_back(ts, v);
    if (end == text.size()) break;
  }
  if (!header_seen) throw Error(Errc::MissingColumn, "missing header");
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no data rows");

  Dataset ds;
  for (auto& [beam, pts] : rows) {
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    TrafficSeries s{beam, pts.front().first, {}};
    s.values.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0 && pts[i].first - pts[i - 1].first != 1)
        throw Error(Errc::NonHourlyGap, "beam '" + beam + "' jumps from hour " +
                                            std::to_string(pts[i - 1].first) + " to " +
                                            std::to_string(pts[i].first));
      s.values.push_back(pts[i].second);
    }
    ds.series.push_back(std::move(s));
  }
  validate(ds);
  return ds;
}

inline Dataset load_csv(const std::filesystem::path& path) {
  return parse_csv(text::read_file(path));
}

inline std::string to_csv(const Dataset& ds) {
  std::string out = "timestamp,beam_id,traffic\n";
  for (const auto& s : ds.series)
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += std::to_string(s.start_time + static_cast<EpochHour>(i));
      out += ',';
      out += s.beam_id;
      out += ',';
      out += text::format_double(s.values[i]);
      out += '\n';
    }
  return out;
}

inline void validate(const SyntheticSpec& spec) {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidConfig, "synthetic spec: " + what); };
  if (spec.n_beams < 1) bad("n_beams must be >= 1");
  if (spec.n_days < 1) bad("n_days must be >= 1");
  if (!(spec.base_load > 0.0)) bad("base_load must be > 0");
  if (!(spec.diurnal_amplitude >= 0.0)) bad("diurnal_amplitude must be >= 0");
  if (!(spec.weekly_amplitude >= 0.0)) bad("weekly_amplitude must be >= 0");
  if (!(spec.noise_ar_coeff >= 0.0 && spec.noise_ar_coeff < 1.0)) bad("noise_ar_coeff must be in [0,1)");
  if (!(spec.noise_std >= 0.0)) bad("noise_std must be >= 0");
  if (!(spec.burst_rate >= 0.0)) bad("burst_rate must be >= 0");
  if (!(spec.burst_scale >= 0.0)) bad("burst_scale must be >= 0");
  if (!(spec.burst_decay_hours > 0.0)) bad("burst_decay_hours must be > 0");
  if (!spec.phase_offsets.empty() && spec.phase_offsets.size() != spec.n_beams)
    bad("phase_offsets must be empty or have n_beams entries");
  for (double p : spec.phase_offsets)
    if (!std::isfinite(p)) bad("phase_offsets must be finite");
}

inline std::string beam_name(std::size_t index, std::size_t count) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  return "beam" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

/// value(t) = max(0, base + diurnal sine (per-beam phase) + weekly sine
///                   + AR(1) noise + decaying Poisson bursts)
inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  const std::size_t T = spec.n_days * 24;
  const double two_pi = 2.0 * std::numbers::pi;
  const double burst_keep = std::exp(-1.0 / spec.burst_decay_hours);
  const double ar = spec.noise_ar_coeff;

  Dataset ds;
  ds.series.reserve(spec.n_beams);
  for (std::size_t b = 0; b < spec.n_beams; ++b) {
    const double phase = spec.phase_offsets.empty()
                             ? 24.0 * static_cast<double>(b) / static_cast<double>(spec.n_beams)
                             : spec.phase_offsets[b];
    Rng rng(derive_seed(seed, b));
    TrafficSeries s{beam_name(b, spec.n_beams), spec.start_time, std::vector<double>(T)};

    double noise = spec.noise_std / std::sqrt(1.0 - ar * ar) * rng.normal();
    double burst = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
      const double t = static_cast<double>(spec.start_time + static_cast<EpochHour>(i));
      if (i > 0) noise = ar * noise + spec.noise_std * rng.normal();
      burst *= burst_keep;
      for (unsigned k = rng.poisson(spec.burst_rate / 24.0); k > 0; --k)
        burst += rng.exponential(spec.burst_scale);
      const double v = spec.base_load + spec.diurnal_amplitude * std::sin(two_pi * (t + phase) / 24.0) +
                       spec.weekly_amplitude * std::sin(two_pi * t / 168.0) + noise + burst;
      s.values[i] = std::max(0.0, v);
    }
    ds.series.push_back(std::move(s));
  }
  return ds;
}

/// Number of windows a series of length T yields.
constexpr std::size_t window_count(std::size_t T, std::size_t context_len, std::size_t horizon,
                                   std::size_t stride) noexcept {
  if (context_len + horizon > T || stride == 0) return 0;
  return (T - context_len - horizon) / stride + 1;
}

inline std::vector<ForecastWindow> make_windows(const Dataset& ds, std::size_t context_len,
                                                std::size_t horizon, std::size_t stride = 1) {
  if (context_len == 0 || horizon == 0 || stride == 0)
    throw Error(Errc::InvalidConfig, "context_len, horizon and stride must be positive");
  std::vector<ForecastWindow> out;
  for (const auto& s : ds.series) {
    if (context_len + horizon > s.size())
      throw Error(Errc::WindowTooLong, "context " + std::to_string(context_len) + " + horizon " +
                                           std::to_string(horizon) + " exceeds series length " +
                                           std::to_string(s.size()));
    const std::size_t n = window_count(s.size(), context_len, horizon, stride);
    for (std::size_t w = 0; w < n; ++w) {
      const std::size_t off = w * stride;
      const auto first = s.values.begin() + static_cast<std::ptrdiff_t>(off);
      const auto mid = first + static_cast<std::ptrdiff_t>(context_len);
      out.push_back({s.beam_id, s.start_time + static_cast<EpochHour>(off + context_len),
                     std::vector<double>(first, mid),
                     std::vector<double>(mid, mid + static_cast<std::ptrdiff_t>(horizon))});
    }
  }
  return out;
}

/// Copy of `ds` restricted to hours [from, to).
inline Dataset slice(const Dataset& ds, EpochHour from, EpochHour to) {
  Dataset out;
  for (const auto& s : ds.series) {
    const EpochHour lo = std::max(from, s.start_time);
    const EpochHour hi = std::min(to, s.end_time());
    TrafficSeries t{s.beam_id, lo, {}};
    if (hi > lo)
      t.values.assign(s.values.begin() + (lo - s.start_time), s.values.begin() + (hi - s.start_time));
    out.series.push_back(std::move(t));
  }
  return out;
}

/// Sample mean and sample standard deviation (n-1), floored at kStdFloor.
inline NormStats norm_stats(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::ShapeMismatch, "cannot normalize an empty context");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  return {mean, std::max(sd, kStdFloor)};
}

inline std::vector<double> apply_norm(std::span<const double> x, const NormStats& st) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - st.mean) / st.std;
  return out;
}

inline std::pair<std::vector<double>, NormStats> normalize(std::span<const double> context) {
  const auto st = norm_stats(context);
  return {apply_norm(context, st), st};
}

inline std::vector<double> denormalize(std::span<const double> z, const NormStats& st) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * st.std + st.mean;
  return out;
}

}  // namespace ntnfc
