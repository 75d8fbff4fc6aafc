#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
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
#include "ephemera/predictor.hpp"
#include "ephemera/strategy.hpp"
#include "json.hpp"

namespace ephemera {

/// PerShare: execution price moves by `slippage_per_share` currency units.
/// Proportional: it moves by close * slippage_per_share.
enum class SlippageMode { PerShare, Proportional };

inline std::string_view to_string(SlippageMode m) {
  return m == SlippageMode::PerShare ? "per_share" : "proportional";
}

struct CostModel {
  double commission_per_share = 0.005;
  double slippage_per_share = 0.02;
  SlippageMode slippage_mode = SlippageMode::PerShare;
  double position_fraction = 0.10;
  double initial_capital = 100000.0;
  double risk_free_annual = 0.0505;
  double trading_days_per_year = 252;

  friend bool operator==(const CostModel&, const CostModel&) = default;
};

inline void validate(const CostModel& c) {
  for (double v : {c.commission_per_share, c.slippage_per_share, c.initial_capital,
                   c.risk_free_annual, c.trading_days_per_year})
    if (!(v >= 0) || !std::isfinite(v))
      throw ConfigError("trade_engine", "cost model fields must be finite and nonnegative");
  if (!(c.position_fraction > 0 && c.position_fraction <= 1))
    throw ConfigError("trade_engine", "position_fraction must lie in (0, 1]");
  if (!(c.trading_days_per_year > 0))
    throw ConfigError("trade_engine", "trading_days_per_year must be positive");
}

inline double slippage_amount(double close, const CostModel& c) {
  return c.slippage_mode == SlippageMode::PerShare ? c.slippage_per_share
                                                   : close * c.slippage_per_share;
}

struct TradeRecord {
  std::size_t day = 0;
  std::string ticker;
  Signal side = Signal::Buy;
  std::int64_t shares = 0;
  double execution_price = 0;
  double commission_paid = 0;
  double slippage_paid = 0;

  friend bool operator==(const TradeRecord&, const TradeRecord&) = default;
};

struct PortfolioState {
  double cash = 0;
  std::map<std::string, std::int64_t> holdings;
  /// Latest close seen per ticker; used for mark-to-market valuation.
  std::map<std::string, double> marks;
  std::size_t day = 0;
  std::vector<double> value_history;

  static PortfolioState initial(const CostModel& c) {
    PortfolioState s;
    s.cash = c.initial_capital;
    return s;
  }

  std::int64_t shares_of(const std::string& ticker) const {
    auto it = holdings.find(ticker);
    return it == holdings.end() ? 0 : it->second;
  }

  double total_value() const {
    double v = cash;
    for (const auto& [ticker, n] : holdings) {
      if (n == 0) continue;
      auto it = marks.find(ticker);
      if (it == marks.end())
        throw SimulationError("no mark price for held ticker '" + ticker + "'");
      v += double(n) * it->second;
    }
    return v;
  }
};

/// Applies one signal at `day_close`. Infeasible trades (no cash, no shares,
/// fewer than one share) are ignored and yield no record.
inline std::optional<TradeRecord> execute_signal(PortfolioState& state, const std::string& ticker,
                                                 Signal signal, double day_close,
                                                 const CostModel& cost) {
  if (!(day_close > 0))
    throw SimulationError(ticker + ": close must be positive");
  state.marks[ticker] = day_close;
  if (signal == Signal::Hold) return std::nullopt;

  const double slip = slippage_amount(day_close, cost);
  const double budget = cost.position_fraction * state.total_value();

  if (signal == Signal::Buy) {
    const double price = day_close + slip;
    const auto shares = static_cast<std::int64_t>(std::floor(budget / price));
    if (shares < 1) return std::nullopt;
    const double outlay = double(shares) * price + cost.commission_per_share * double(shares);
    if (state.cash < outlay) return std::nullopt;
    state.cash -= outlay;
    state.holdings[ticker] += shares;
    return TradeRecord{state.day, ticker, Signal::Buy, shares, price,
                       cost.commission_per_share * double(shares), slip * double(shares)};
  }

  const std::int64_t held = state.shares_of(ticker);
  if (held < 1) return std::nullopt;
  const double price = day_close - slip;
  if (!(price > 0)) return std::nullopt;
  const auto target = static_cast<std::int64_t>(std::floor(budget / day_close));
  const std::int64_t shares = std::min(held, std::max<std::int64_t>(target, 1));
  const double proceeds = double(shares) * price - cost.commission_per_share * double(shares);
  if (state.cash + proceeds < 0) return std::nullopt;
  state.cash += proceeds;
  state.holdings[ticker] -= shares;
  return TradeRecord{state.day, ticker, Signal::Sell, shares, price,
                     cost.commission_per_share * double(shares), slip * double(shares)};
}

struct SharpeRatio {
  double value = 0;
  /// Set when the excess returns have (numerically) zero spread; value is 0.
  bool zero_volatility = false;

  friend bool operator==(const SharpeRatio&, const SharpeRatio&) = default;
};

inline double daily_risk_free(const CostModel& c) {
  return std::pow(1.0 + c.risk_free_annual, 1.0 / c.trading_days_per_year) - 1.0;
}

/// Annualised mean excess return over its sample standard deviation.
inline SharpeRatio sharpe_ratio(std::span<const double> daily_returns, const CostModel& cost) {
  const std::size_t n = daily_returns.size();
  if (n < 2) throw SimulationError("Sharpe ratio needs at least two returns");
  const double rf = daily_risk_free(cost);
  double mean = 0;
  for (double r : daily_returns) mean += r - rf;
  mean /= double(n);
  double ss = 0;
  for (double r : daily_returns) ss += (r - rf - mean) * (r - rf - mean);
  const double sd = std::sqrt(ss / double(n - 1));
  if (sd <= 1e-12) return {0.0, true};
  return {mean / sd * std::sqrt(cost.trading_days_per_year), false};
}

inline std::vector<double> cumulative_returns(std::span<const double> daily_returns) {
  std::vector<double> out;
  out.reserve(daily_returns.size());
  double growth = 1.0;
  for (double r : daily_returns) {
    growth *= 1.0 + r;
    out.push_back(growth - 1.0);
  }
  return out;
}

struct SimulationResult {
  std::vector<double> daily_returns;
  std::vector<double> cumulative_returns;
  std::vector<double> value_history;
  SharpeRatio sharpe;
  std::vector<TradeRecord> trades;
  double initial_capital = 0;
  double final_value = 0;

  double final_cumulative_return() const {
    return cumulative_returns.empty() ? 0.0 : cumulative_returns.back();
  }

  friend bool operator==(const SimulationResult&, const SimulationResult&) = default;
};

/// Executed (already shifted) signals per ticker, one per test day.
using SignalPlan = std::map<std::string, std::vector<Signal>>;

/// Steps the portfolio through `test` executing `plan`. Tickers trade in
/// lexicographic order each day; the portfolio is marked at that day's closes.
inline SimulationResult execute_plan(const Dataset& test, const SignalPlan& plan,
                                     const CostModel& cost) {
  validate(cost);
  const std::size_t n = test.days();
  if (n < 2) throw SimulationError("test window needs at least two days");
  for (const auto& s : test.series) {
    auto it = plan.find(s.ticker);
    if (it == plan.end()) throw SimulationError(s.ticker + ": no signals supplied");
    if (it->second.size() != n)
      throw SimulationError(s.ticker + ": " + std::to_string(it->second.size()) +
                            " signals for " + std::to_string(n) + " test days");
  }

  SimulationResult result;
  result.initial_capital = cost.initial_capital;
  auto state = PortfolioState::initial(cost);
  double prev_value = cost.initial_capital;
  for (std::size_t d = 0; d < n; ++d) {
    state.day = d;
    for (const auto& s : test.series) state.marks[s.ticker] = s.bars[d].close;
    for (const auto& s : test.series) {
      if (auto trade = execute_signal(state, s.ticker, plan.at(s.ticker)[d], s.bars[d].close, cost))
        result.trades.push_back(std::move(*trade));
    }
    const double value = state.total_value();
    state.value_history.push_back(value);
    result.daily_returns.push_back(value / prev_value - 1.0);
    prev_value = value;
  }
  result.value_history = std::move(state.value_history);
  result.cumulative_returns = cumulative_returns(result.daily_returns);
  result.sharpe = sharpe_ratio(result.daily_returns, cost);
  result.final_value = result.value_history.back();
  return result;
}

/// Dense per-ticker forecasts for every test day.
using PredictionMatrix = std::map<std::string, std::vector<double>>;

inline SignalPlan plan_signals(const Dataset& test, const PredictionMatrix& predictions,
                               const StrategyConfig& strategy) {
  SignalPlan plan;
  for (const auto& s : test.series) {
    auto it = predictions.find(s.ticker);
    if (it == predictions.end()) throw SimulationError(s.ticker + ": no predictions supplied");
    if (it->second.size() != test.days())
      throw SimulationError(s.ticker + ": predictions do not match the test calendar");
    const auto closes = s.closes();
    const auto generated = generate_signals(closes, it->second, strategy);
    plan.emplace(s.ticker, shift_signals(generated));
  }
  return plan;
}

inline SimulationResult simulate(const Dataset& test, const PredictionMatrix& predictions,
                                 const StrategyConfig& strategy, const CostModel& cost) {
  return execute_plan(test, plan_signals(test, predictions, strategy), cost);
}

/// Predictions are keyed by test-day index.
inline SimulationResult run_simulation(const Dataset& test,
                                       const std::map<std::string, PredictionSeries>& predictions,
                                       const StrategyConfig& strategy, const CostModel& cost) {
  PredictionMatrix dense;
  for (const auto& s : test.series) {
    auto it = predictions.find(s.ticker);
    if (it == predictions.end()) throw SimulationError(s.ticker + ": no predictions supplied");
    dense.emplace(s.ticker, dense_predictions(it->second, test.days()));
  }
  return simulate(test, dense, strategy, cost);
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::string_view kResultSchema = "ephemera.simulation_result/1";

inline nlohmann::ordered_json to_json(const SimulationResult& r) {
  nlohmann::ordered_json trades = nlohmann::ordered_json::array();
  for (const auto& t : r.trades)
    trades.push_back({{"day", t.day},
                      {"ticker", t.ticker},
                      {"side", to_string(t.side)},
                      {"shares", t.shares},
                      {"price", t.execution_price},
                      {"commission", t.commission_paid},
                      {"slippage", t.slippage_paid}});
  return {{"schema", kResultSchema},
          {"initial_capital", r.initial_capital},
          {"final_value", r.final_value},
          {"sharpe_ratio", r.sharpe.value},
          {"sharpe_zero_volatility", r.sharpe.zero_volatility},
          {"daily_returns", r.daily_returns},
          {"cumulative_returns", r.cumulative_returns},
          {"value_history", r.value_history},
          {"trades", trades}};
}

inline SimulationResult simulation_result_from_json(const nlohmann::json& j) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw ReportError(std::string("result is missing field '") + name + "'");
    return j.at(name);
  };
  if (!j.is_object() || field("schema") != kResultSchema)
    throw ReportError("result schema mismatch: expected '" + std::string(kResultSchema) + "'");
  SimulationResult r;
  try {
    r.initial_capital = field("initial_capital").get<double>();
    r.final_value = field("final_value").get<double>();
    r.sharpe.value = field("sharpe_ratio").get<double>();
    r.sharpe.zero_volatility = field("sharpe_zero_volatility").get<bool>();
    r.daily_returns = field("daily_returns").get<std::vector<double>>();
    r.cumulative_returns = field("cumulative_returns").get<std::vector<double>>();
    r.value_history = field("value_history").get<std::vector<double>>();
    for (const auto& t : field("trades")) {
      TradeRecord rec;
      rec.day = t.at("day").get<std::size_t>();
      rec.ticker = t.at("ticker").get<std::string>();
      const auto side = t.at("side").get<std::string>();
      if (side != "buy" && side != "sell") throw ReportError("trade side '" + side + "'");
      rec.side = side == "buy" ? Signal::Buy : Signal::Sell;
      rec.shares = t.at("shares").get<std::int64_t>();
      rec.execution_price = t.at("price").get<double>();
      rec.commission_paid = t.at("commission").get<double>();
      rec.slippage_paid = t.at("slippage").get<double>();
      r.trades.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(std::string("malformed result: ") + e.what());
  }
  return r;
}

inline void write_ledger_csv(std::ostream& out, const SimulationResult& r,
                             const std::vector<Date>& calendar) {
  out << "day,date,ticker,side,shares,price,commission,slippage\n";
  for (const auto& t : r.trades)
    out << t.day << ',' << calendar.at(t.day).str() << ',' << t.ticker << ','
        << to_string(t.side) << ',' << t.shares << ','
        << detail::format_double(t.execution_price) << ','
        << detail::format_double(t.commission_paid) << ','
        << detail::format_double(t.slippage_paid) << '\n';
}

inline void write_metrics_csv(std::ostream& out, const SimulationResult& r,
                              const std::vector<Date>& calendar) {
  out << "day,date,portfolio_value,daily_return,cumulative_return\n";
  for (std::size_t d = 0; d < r.daily_returns.size(); ++d)
    out << d << ',' << calendar.at(d).str() << ',' << detail::format_double(r.value_history[d])
        << ',' << detail::format_double(r.daily_returns[d]) << ','
        << detail::format_double(r.cumulative_returns[d]) << '\n';
}

}  // namespace ephemera
