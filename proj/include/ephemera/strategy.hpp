#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ephemera/error.hpp"
#include "ephemera/market_data.hpp"
#include "ephemera/predictor.hpp"

namespace ephemera {

enum class Signal : std::uint8_t { Hold, Buy, Sell };

inline std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::Hold: return "hold";
    case Signal::Buy: return "buy";
    case Signal::Sell: return "sell";
  }
  return "?";
}

enum class StrategyKind { MaCrossover, RateOfChange, BollingerBands };

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::MaCrossover: return "ma_crossover";
    case StrategyKind::RateOfChange: return "rate_of_change";
    case StrategyKind::BollingerBands: return "bollinger_bands";
  }
  return "?";
}

inline std::optional<StrategyKind> parse_strategy_kind(std::string_view s) {
  for (auto k : {StrategyKind::MaCrossover, StrategyKind::RateOfChange,
                 StrategyKind::BollingerBands})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Which value the rate-of-change indicator compares against the lagged close.
enum class RocSource { Prediction, Close };

inline std::string_view to_string(RocSource s) {
  return s == RocSource::Prediction ? "prediction" : "close";
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::MaCrossover;
  std::size_t ma_short = 5;
  std::size_t ma_long = 20;
  std::size_t roc_lookback = 14;
  double roc_buy_threshold = 1.0;
  double roc_sell_threshold = -1.0;
  RocSource roc_source = RocSource::Prediction;
  std::size_t bb_period = 20;
  double bb_width = 2.0;

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

inline void validate(const StrategyConfig& c) {
  if (c.ma_short < 1 || c.ma_short >= c.ma_long)
    throw ConfigError("strategy", "require 1 <= ma_short < ma_long");
  if (c.roc_lookback < 1) throw ConfigError("strategy", "roc_lookback must be >= 1");
  if (!(c.roc_sell_threshold <= c.roc_buy_threshold))
    throw ConfigError("strategy", "roc_sell_threshold must not exceed roc_buy_threshold");
  if (c.bb_period < 2) throw ConfigError("strategy", "bb_period must be >= 2");
  if (!(c.bb_width > 0)) throw ConfigError("strategy", "bb_width must be > 0");
}

namespace detail {

inline double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

// Relative slack below which two moving averages are considered tied; exact
// ties come out a few ulps apart after summation.
inline constexpr double kTieTolerance = 1e-12;

}  // namespace detail

/// Moving-average crossover on the prediction stream. `predictions[d]` is the
/// forecast for day d; the signal for day d only looks at predictions <= d.
inline std::vector<Signal> ma_crossover_signals(std::span<const double> predictions,
                                                const StrategyConfig& config) {
  validate(config);
  const std::size_t n = predictions.size();
  std::vector<Signal> out(n, Signal::Hold);
  std::optional<bool> prev_above;
  for (std::size_t d = 0; d < n; ++d) {
    if (d + 1 < config.ma_long) continue;
    const double s = detail::mean_of(predictions.subspan(d + 1 - config.ma_short, config.ma_short));
    const double l = detail::mean_of(predictions.subspan(d + 1 - config.ma_long, config.ma_long));
    const bool above = s - l > detail::kTieTolerance * std::max(1.0, std::abs(l));
    if (prev_above) {
      if (above && !*prev_above) out[d] = Signal::Buy;
      else if (!above && *prev_above) out[d] = Signal::Sell;
    }
    prev_above = above;
  }
  return out;
}

inline double rate_of_change(double value, double reference) {
  return (value - reference) / reference * 100.0;
}

/// ROC of the day's decision value against the close `roc_lookback` days back.
inline std::vector<Signal> roc_signals(std::span<const double> closes,
                                       std::span<const double> predictions,
                                       const StrategyConfig& config) {
  validate(config);
  if (closes.size() != predictions.size())
    throw Error("strategy", "closes and predictions differ in length");
  std::vector<Signal> out(closes.size(), Signal::Hold);
  for (std::size_t d = config.roc_lookback; d < closes.size(); ++d) {
    const double value = config.roc_source == RocSource::Prediction ? predictions[d] : closes[d];
    const double roc = rate_of_change(value, closes[d - config.roc_lookback]);
    if (roc > config.roc_buy_threshold) out[d] = Signal::Buy;
    else if (roc < config.roc_sell_threshold) out[d] = Signal::Sell;
  }
  return out;
}

struct Band {
  double lower = 0;
  double middle = 0;
  double upper = 0;
};

/// Mean +/- width * population deviation of `closes`.
inline Band bollinger_band(std::span<const double> closes, double width) {
  const double m = detail::mean_of(closes);
  double ss = 0;
  for (double c : closes) ss += (c - m) * (c - m);
  const double sd = std::sqrt(ss / double(closes.size()));
  return {m - width * sd, m, m + width * sd};
}

/// The band for day d is built from the bb_period closes strictly before d,
/// i.e. the history available when the forecast for d was made.
inline std::vector<Signal> bollinger_signals(std::span<const double> closes,
                                             std::span<const double> predictions,
                                             const StrategyConfig& config) {
  validate(config);
  if (closes.size() != predictions.size())
    throw Error("strategy", "closes and predictions differ in length");
  std::vector<Signal> out(closes.size(), Signal::Hold);
  for (std::size_t d = config.bb_period; d < closes.size(); ++d) {
    const auto band = bollinger_band(closes.subspan(d - config.bb_period, config.bb_period),
                                     config.bb_width);
    if (predictions[d] > band.upper) out[d] = Signal::Buy;
    else if (predictions[d] < band.lower) out[d] = Signal::Sell;
  }
  return out;
}

/// Day t executes what was generated on day t-1; day 0 holds.
inline std::vector<Signal> shift_signals(std::span<const Signal> signals) {
  std::vector<Signal> out(signals.size(), Signal::Hold);
  for (std::size_t t = 1; t < signals.size(); ++t) out[t] = signals[t - 1];
  return out;
}

inline std::vector<Signal> generate_signals(std::span<const double> closes,
                                            std::span<const double> predictions,
                                            const StrategyConfig& config) {
  switch (config.kind) {
    case StrategyKind::MaCrossover: return ma_crossover_signals(predictions, config);
    case StrategyKind::RateOfChange: return roc_signals(closes, predictions, config);
    case StrategyKind::BollingerBands: return bollinger_signals(closes, predictions, config);
  }
  return {};
}

/// Dense copy of a prediction series; every day must be present.
inline std::vector<double> dense_predictions(const PredictionSeries& p, std::size_t days) {
  std::vector<double> out;
  out.reserve(days);
  for (std::size_t t = 0; t < days; ++t) {
    if (!p.has(t))
      throw SimulationError(p.ticker + ": no prediction for test day " + std::to_string(t));
    out.push_back(*p.values[t]);
  }
  return out;
}

}  // namespace ephemera
