#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ephemera/detail/text.hpp"
#include "ephemera/error.hpp"
#include "ephemera/market_data.hpp"

namespace ephemera {

enum class Feature { Open, High, Low, Close, Volume };

inline constexpr std::array<Feature, 5> kAllFeatures = {Feature::Open, Feature::High, Feature::Low,
                                                        Feature::Close, Feature::Volume};

inline std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::Open: return "open";
    case Feature::High: return "high";
    case Feature::Low: return "low";
    case Feature::Close: return "close";
    case Feature::Volume: return "volume";
  }
  return "?";
}

inline std::optional<Feature> parse_feature(std::string_view s) {
  for (auto f : kAllFeatures)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

inline double feature_value(const Bar& b, Feature f) {
  switch (f) {
    case Feature::Open: return b.open;
    case Feature::High: return b.high;
    case Feature::Low: return b.low;
    case Feature::Close: return b.close;
    case Feature::Volume: return b.volume;
  }
  return 0;
}

struct PredictorConfig {
  std::size_t window = 50;
  std::vector<Feature> features{kAllFeatures.begin(), kAllFeatures.end()};
  double ridge_lambda = 1e-3;

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

inline void validate(const PredictorConfig& c) {
  if (c.window < 1) throw ConfigError("predictor", "window must be >= 1");
  if (c.features.empty()) throw ConfigError("predictor", "feature list is empty");
  for (std::size_t i = 0; i < c.features.size(); ++i)
    for (std::size_t j = i + 1; j < c.features.size(); ++j)
      if (c.features[i] == c.features[j])
        throw ConfigError("predictor",
                          "feature '" + std::string(to_string(c.features[i])) + "' listed twice");
  if (!(c.ridge_lambda >= 0) || !std::isfinite(c.ridge_lambda))
    throw ConfigError("predictor", "ridge_lambda must be finite and >= 0");
}

/// Affine min-max scaling: scaled = (x - offset) / scale.
struct FeatureScale {
  double offset = 0;
  double scale = 1;

  double apply(double x) const { return (x - offset) / scale; }
  double invert(double y) const { return offset + scale * y; }
};

inline FeatureScale fit_scale(std::span<const Bar> bars, Feature f) {
  double lo = feature_value(bars.front(), f), hi = lo;
  for (const auto& b : bars) {
    lo = std::min(lo, feature_value(b, f));
    hi = std::max(hi, feature_value(b, f));
  }
  return {lo, hi > lo ? hi - lo : 1.0};
}

/// Next-day close forecasts keyed by day index into some calendar. Entry `t`
/// is the forecast for day t made from the window ending at day t-1.
struct PredictionSeries {
  std::string ticker;
  std::vector<std::optional<double>> values;

  std::size_t size() const { return values.size(); }
  bool has(std::size_t t) const { return t < values.size() && values[t].has_value(); }
  double at(std::size_t t) const {
    if (!has(t))
      throw Error("predictor", ticker + ": no prediction for day " + std::to_string(t));
    return *values[t];
  }

  friend bool operator==(const PredictionSeries&, const PredictionSeries&) = default;
};

/// Ridge-regularised linear autoregression from a flattened, normalised
/// feature window to the normalised next-day close. No intercept: the target
/// shares the close feature's scaling, so a constant series maps to zero
/// inputs and zero output, which de-normalises back to the constant.
class LinearPredictor {
 public:
  static LinearPredictor fit(const StockSeries& train, const PredictorConfig& config) {
    validate(config);
    const std::size_t w = config.window;
    const std::size_t n = train.size();
    if (n < w + 1)
      throw FitError(train.ticker + ": train history of " + std::to_string(n) +
                     " days is shorter than window + 1 = " + std::to_string(w + 1));

    LinearPredictor p;
    p.ticker_ = train.ticker;
    p.config_ = config;
    std::span<const Bar> bars(train.bars);
    for (auto f : config.features) p.scales_.push_back(fit_scale(bars, f));
    p.target_scale_ = fit_scale(bars, Feature::Close);

    const std::size_t n_samples = n - w;
    const std::size_t n_params = w * config.features.size();
    Eigen::MatrixXd x(n_samples, n_params);
    Eigen::VectorXd y(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      p.fill_row(bars.subspan(i, w), x.row(static_cast<Eigen::Index>(i)));
      y(static_cast<Eigen::Index>(i)) = p.target_scale_.apply(train.bars[i + w].close);
    }

    if (config.ridge_lambda > 0) {
      Eigen::MatrixXd normal = x.transpose() * x;
      normal.diagonal().array() += config.ridge_lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(normal);
      if (llt.info() != Eigen::Success)
        throw FitError(train.ticker + ": normal matrix is not positive definite");
      p.coef_ = llt.solve(x.transpose() * y);
    } else {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
      if (qr.rank() < static_cast<Eigen::Index>(n_params))
        throw FitError(train.ticker + ": normal matrix is singular (rank " +
                       std::to_string(qr.rank()) + " < " + std::to_string(n_params) +
                       "); use a nonzero ridge_lambda");
      p.coef_ = qr.solve(y);
    }
    p.n_train_samples_ = n_samples;
    return p;
  }

  /// Forecast of the day after the last bar of `window`.
  double predict(std::span<const Bar> window) const {
    if (window.size() != config_.window)
      throw WindowError(ticker_ + ": expected window of " + std::to_string(config_.window) +
                        " bars, got " + std::to_string(window.size()));
    double acc = 0;
    std::size_t k = 0;
    for (const auto& bar : window)
      for (std::size_t j = 0; j < config_.features.size(); ++j, ++k)
        acc += coef_(static_cast<Eigen::Index>(k)) *
               scales_[j].apply(feature_value(bar, config_.features[j]));
    return target_scale_.invert(acc);
  }

  /// Forecast for day t+1 from the window ending at day t.
  double predict_next(const StockSeries& series, std::size_t t) const {
    return predict(window(series, t, config_.window));
  }

  const std::string& ticker() const { return ticker_; }
  const PredictorConfig& config() const { return config_; }
  const std::vector<FeatureScale>& scales() const { return scales_; }
  const FeatureScale& target_scale() const { return target_scale_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }
  std::size_t n_train_samples() const { return n_train_samples_; }

 private:
  template <typename Row>
  void fill_row(std::span<const Bar> window, Row&& row) const {
    Eigen::Index k = 0;
    for (const auto& bar : window)
      for (std::size_t j = 0; j < config_.features.size(); ++j)
        row(k++) = scales_[j].apply(feature_value(bar, config_.features[j]));
  }

  std::string ticker_;
  PredictorConfig config_;
  std::vector<FeatureScale> scales_;
  FeatureScale target_scale_;
  Eigen::VectorXd coef_;
  std::size_t n_train_samples_ = 0;
};

using PredictorSet = std::map<std::string, LinearPredictor>;

/// One predictor per ticker, fitted on the train partition only.
inline PredictorSet fit_baseline(const Dataset& train, const PredictorConfig& config) {
  PredictorSet out;
  for (const auto& s : train.series) out.emplace(s.ticker, LinearPredictor::fit(s, config));
  return out;
}

/// Forecasts for days [first, first + count) of `history`, re-keyed so that
/// entry k is the forecast for history day first + k.
inline PredictionSeries forecast(const LinearPredictor& predictor, const StockSeries& history,
                                 std::size_t first, std::size_t count) {
  if (first < predictor.config().window)
    throw WindowError(history.ticker + ": day " + std::to_string(first) +
                      " cannot be forecast with window " +
                      std::to_string(predictor.config().window));
  if (first + count > history.size())
    throw WindowError(history.ticker + ": forecast range exceeds history");
  PredictionSeries out{history.ticker, {}};
  out.values.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    out.values.emplace_back(predictor.predict_next(history, first + k - 1));
  return out;
}

inline double evaluate_rmse(const PredictionSeries& predictions, const StockSeries& actual,
                            std::size_t begin, std::size_t end) {
  if (begin >= end) throw EvaluationError(actual.ticker + ": empty evaluation range");
  if (end > actual.size())
    throw EvaluationError(actual.ticker + ": evaluation range exceeds series");
  double sum = 0;
  for (std::size_t t = begin; t < end; ++t) {
    if (!predictions.has(t))
      throw EvaluationError(actual.ticker + ": missing prediction for day " + std::to_string(t));
    const double e = *predictions.values[t] - actual.bars[t].close;
    sum += e * e;
  }
  return std::sqrt(sum / double(end - begin));
}

struct FitReport {
  std::string ticker;
  double rmse_test = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

// ---------------------------------------------------------------------------
// Prediction files: header `Date,Prediction`.

inline PredictionSeries parse_predictions(std::istream& in, const std::vector<Date>& calendar,
                                          const std::string& ticker) {
  PredictionSeries out{ticker, std::vector<std::optional<double>>(calendar.size())};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  int c_date = -1, c_pred = -1;
  std::size_t n_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    auto fields = detail::split_fields(trimmed);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "Date") c_date = static_cast<int>(i);
        if (fields[i] == "Prediction") c_pred = static_cast<int>(i);
      }
      if (c_date < 0 || c_pred < 0)
        throw ImportError(ticker + ": header must contain Date and Prediction");
      n_cols = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != n_cols)
      throw ImportError(ticker + ": line " + std::to_string(line_no) + ": wrong field count");
    auto date = Date::parse(fields[c_date]);
    if (!date)
      throw ImportError(ticker + ": line " + std::to_string(line_no) + ": invalid date '" +
                        std::string(fields[c_date]) + "'");
    auto value = detail::parse_double(fields[c_pred]);
    if (!value || !std::isfinite(*value))
      throw ImportError(ticker + ": line " + std::to_string(line_no) + ": invalid prediction");
    auto it = std::lower_bound(calendar.begin(), calendar.end(), *date);
    if (it == calendar.end() || *it != *date)
      throw ImportError(ticker + ": date " + date->str() + " is not in the trading calendar");
    auto& slot = out.values[static_cast<std::size_t>(it - calendar.begin())];
    if (slot) throw ImportError(ticker + ": duplicate date " + date->str());
    slot = *value;
  }
  if (!have_header) throw ImportError(ticker + ": empty prediction file");
  return out;
}

inline PredictionSeries import_predictions(const std::string& path,
                                           const std::vector<Date>& calendar,
                                           const std::string& ticker) {
  std::ifstream in(path);
  if (!in) throw ImportError("cannot open '" + path + "'");
  return parse_predictions(in, calendar, ticker);
}

inline void write_predictions(std::ostream& out, const PredictionSeries& p,
                              const std::vector<Date>& calendar) {
  out << "Date,Prediction\n";
  for (std::size_t t = 0; t < p.size() && t < calendar.size(); ++t)
    if (p.values[t]) out << calendar[t].str() << ',' << detail::format_double(*p.values[t]) << '\n';
}

}  // namespace ephemera
