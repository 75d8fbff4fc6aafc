#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ephemera/error.hpp"
#include "ephemera/market_data.hpp"
#include "ephemera/parallel.hpp"
#include "ephemera/predictor.hpp"
#include "ephemera/strategy.hpp"
#include "ephemera/trade_engine.hpp"

namespace ephemera {

/// How the perturbed close is crafted.
///  StdDev:       close + 2 * std(closes over the last omega days, ending at t)
///  Conceal:      previous day's close
///  Overestimate: previous day's close * (1 - drop_fraction)
///  Custom:       a fixed value
///  Null:         the clean close itself (control run)
enum class EpMode { StdDev, Conceal, Overestimate, Custom, Null };

inline std::string_view to_string(EpMode m) {
  switch (m) {
    case EpMode::StdDev: return "stddev";
    case EpMode::Conceal: return "conceal";
    case EpMode::Overestimate: return "overestimate";
    case EpMode::Custom: return "custom";
    case EpMode::Null: return "null";
  }
  return "?";
}

inline std::optional<EpMode> parse_ep_mode(std::string_view s) {
  for (auto m : {EpMode::StdDev, EpMode::Conceal, EpMode::Overestimate, EpMode::Custom,
                 EpMode::Null})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

enum class Deviation { Sample, Population };

struct EpSpec {
  std::string ticker;
  std::size_t day = 0;  ///< index into the series the EP is applied to
  EpMode mode = EpMode::StdDev;
  std::size_t omega = 50;
  double drop_fraction = 0.10;
  double value = 0;
  Deviation deviation = Deviation::Sample;

  friend bool operator==(const EpSpec&, const EpSpec&) = default;
};

inline std::string mode_label(const EpSpec& ep) {
  return ep.mode == EpMode::StdDev ? std::to_string(ep.omega) : std::string(to_string(ep.mode));
}

inline double deviation_of(std::span<const double> v, Deviation kind) {
  // Shifted by the first value so a flat window is exactly zero.
  const double k = v.front();
  double mean = 0;
  for (double x : v) mean += x - k;
  mean /= double(v.size());
  double ss = 0;
  for (double x : v) ss += (x - k - mean) * (x - k - mean);
  const double denom = kind == Deviation::Sample ? double(v.size() - 1) : double(v.size());
  return std::sqrt(ss / denom);
}

/// Feasibility of `ep` against `series`; returns the reason when infeasible.
inline std::optional<std::string> ep_infeasibility(const StockSeries& series, const EpSpec& ep) {
  const std::size_t t = ep.day;
  if (t >= series.size()) return "day " + std::to_string(t) + " is outside the series";
  switch (ep.mode) {
    case EpMode::StdDev:
      if (ep.omega < 2) return std::string("omega must be >= 2");
      if (t + 1 < ep.omega)
        return "day " + std::to_string(t) + " has fewer than omega=" + std::to_string(ep.omega) +
               " days of history";
      break;
    case EpMode::Overestimate:
      if (!(ep.drop_fraction > 0 && ep.drop_fraction < 1))
        return std::string("drop_fraction must lie in (0, 1)");
      [[fallthrough]];
    case EpMode::Conceal:
      if (t == 0) return std::string("day 0 has no previous close");
      break;
    case EpMode::Custom:
      if (!(ep.value > 0) || !std::isfinite(ep.value))
        return std::string("custom value must be finite and positive");
      break;
    case EpMode::Null: break;
  }
  return std::nullopt;
}

/// The adversarial close s'_t for day ep.day of `series`.
inline double apply_ep(const StockSeries& series, const EpSpec& ep) {
  if (auto why = ep_infeasibility(series, ep)) throw AttackError(series.ticker + ": " + *why);
  const std::size_t t = ep.day;
  const double clean = series.bars[t].close;
  switch (ep.mode) {
    case EpMode::StdDev: {
      std::vector<double> closes;
      for (std::size_t i = t + 1 - ep.omega; i <= t; ++i) closes.push_back(series.bars[i].close);
      return clean + 2.0 * deviation_of(closes, ep.deviation);
    }
    case EpMode::Conceal: return series.bars[t - 1].close;
    case EpMode::Overestimate: return series.bars[t - 1].close * (1.0 - ep.drop_fraction);
    case EpMode::Custom: return ep.value;
    case EpMode::Null: return clean;
  }
  return clean;
}

/// Forecasts for history days [first, first + count) as the ATS would have
/// produced them live: the forecast for day g is made from the feed as of day
/// g-1, in which the close of `ep_day` reads `perturbed` only while g-1 is
/// ep_day itself. Once the broker refreshes, the clean close is back.
inline std::vector<double> replay_forecasts(const LinearPredictor& predictor,
                                            const StockSeries& history, std::size_t first,
                                            std::size_t count, std::size_t ep_day,
                                            double perturbed) {
  const std::size_t w = predictor.config().window;
  std::vector<double> out;
  out.reserve(count);
  std::vector<Bar> view;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t as_of = first + k - 1;
    auto win = window(history, as_of, w);
    if (as_of == ep_day) {
      view.assign(win.begin(), win.end());
      view.back().close = perturbed;
      out.push_back(predictor.predict(view));
    } else {
      out.push_back(predictor.predict(win));
    }
  }
  return out;
}

struct AttackOutcome {
  EpSpec ep;  ///< ep.day is a test-window index
  double perturbed_value = 0;
  double clean_value = 0;
  double rmse_clean = 0;
  double rmse_attacked = 0;
  double sharpe_baseline = 0;
  double sharpe_attacked = 0;
  double cr_baseline = 0;
  double cr_attacked = 0;
  /// Attacked over baseline gross cumulative return, (1 + CR_a) / (1 + CR_b).
  double cr_ratio = 1;
  std::optional<std::size_t> first_divergence_day;

  double delta_sharpe() const { return sharpe_attacked - sharpe_baseline; }
  /// Change of the final cumulative return in percentage points.
  double cr_change_pp() const { return (cr_attacked - cr_baseline) * 100.0; }
};

struct CellError {
  std::size_t day = 0;
  std::string label;
  std::string message;
};

struct SweepResult {
  SimulationResult baseline;
  std::vector<AttackOutcome> outcomes;
  std::vector<CellError> errors;
};

/// Earliest day on which the two runs' trades or portfolio values differ.
inline std::optional<std::size_t> first_divergence(const SimulationResult& a,
                                                   const SimulationResult& b) {
  const std::size_t n = std::min(a.value_history.size(), b.value_history.size());
  std::size_t ia = 0, ib = 0;
  for (std::size_t d = 0; d < n; ++d) {
    std::size_t ea = ia, eb = ib;
    while (ea < a.trades.size() && a.trades[ea].day == d) ++ea;
    while (eb < b.trades.size() && b.trades[eb].day == d) ++eb;
    if (!std::equal(a.trades.begin() + long(ia), a.trades.begin() + long(ea),
                    b.trades.begin() + long(ib), b.trades.begin() + long(eb)))
      return d;
    if (a.value_history[d] != b.value_history[d]) return d;
    ia = ea;
    ib = eb;
  }
  if (a.value_history.size() != b.value_history.size()) return n;
  return std::nullopt;
}

/// Holds one clean backtest and runs perturbed variants of it. Immutable after
/// construction, so sweep cells can share it across threads.
class AttackHarness {
 public:
  AttackHarness(Dataset history, std::size_t test_begin, PredictorSet predictors,
                StrategyConfig strategy, CostModel cost)
      : history_(std::move(history)),
        test_begin_(test_begin),
        predictors_(std::move(predictors)),
        strategy_(strategy),
        cost_(cost) {
    if (test_begin_ >= history_.days()) throw AttackError("test window is empty");
    test_ = slice(history_, test_begin_, history_.days());
    for (const auto& s : history_.series) {
      auto it = predictors_.find(s.ticker);
      if (it == predictors_.end()) throw AttackError(s.ticker + ": no fitted predictor");
      auto p = forecast(it->second, s, test_begin_, test_.days());
      clean_.emplace(s.ticker, dense_predictions(p, test_.days()));
    }
    baseline_ = simulate(test_, clean_, strategy_, cost_);
  }

  const Dataset& history() const { return history_; }
  const Dataset& test() const { return test_; }
  std::size_t test_begin() const { return test_begin_; }
  const PredictionMatrix& clean_predictions() const { return clean_; }
  const SimulationResult& baseline() const { return baseline_; }
  const StrategyConfig& strategy() const { return strategy_; }
  const CostModel& cost() const { return cost_; }

  /// The target ticker's forecast stream under `ep` (ep.day is a test index).
  std::vector<double> attacked_predictions(const EpSpec& ep) const {
    const auto& series = target(ep);
    const std::size_t g = test_begin_ + ep.day;
    EpSpec global = ep;
    global.day = g;
    const double perturbed = apply_ep(series, global);
    return replay_forecasts(predictors_.at(ep.ticker), series, test_begin_, test_.days(), g,
                            perturbed);
  }

  std::pair<SimulationResult, AttackOutcome> run(const EpSpec& ep) const {
    const auto& series = target(ep);
    if (ep.day >= test_.days())
      throw AttackError(ep.ticker + ": day " + std::to_string(ep.day) +
                        " is outside the test window of " + std::to_string(test_.days()) +
                        " days");
    EpSpec global = ep;
    global.day = test_begin_ + ep.day;
    if (auto why = ep_infeasibility(series, global)) throw AttackError(ep.ticker + ": " + *why);

    AttackOutcome out;
    out.ep = ep;
    out.clean_value = series.bars[global.day].close;
    out.perturbed_value = apply_ep(series, global);

    PredictionMatrix attacked = clean_;
    attacked[ep.ticker] = replay_forecasts(predictors_.at(ep.ticker), series, test_begin_,
                                           test_.days(), global.day, out.perturbed_value);
    auto result = simulate(test_, attacked, strategy_, cost_);

    const auto& actual = test_.at(ep.ticker);
    out.rmse_clean = rmse(clean_.at(ep.ticker), actual);
    out.rmse_attacked = rmse(attacked.at(ep.ticker), actual);
    out.sharpe_baseline = baseline_.sharpe.value;
    out.sharpe_attacked = result.sharpe.value;
    out.cr_baseline = baseline_.final_cumulative_return();
    out.cr_attacked = result.final_cumulative_return();
    out.cr_ratio = (1.0 + out.cr_attacked) / (1.0 + out.cr_baseline);
    out.first_divergence_day = first_divergence(baseline_, result);
    return {std::move(result), std::move(out)};
  }

  /// One attacked run per (day, template), day-major. Infeasible cells are
  /// recorded in `errors` and skipped.
  SweepResult sweep(const std::vector<std::size_t>& days, const std::vector<EpSpec>& templates,
                    std::size_t workers = 1) const {
    const std::size_t n_cells = days.size() * templates.size();
    std::vector<std::optional<AttackOutcome>> cells(n_cells);
    std::vector<std::optional<std::string>> failures(n_cells);
    parallel_for(n_cells, workers, [&](std::size_t i) {
      EpSpec ep = templates[i % templates.size()];
      ep.day = days[i / templates.size()];
      try {
        cells[i] = run(ep).second;
      } catch (const Error& e) {
        failures[i] = e.what();
      }
    });
    SweepResult out;
    out.baseline = baseline_;
    for (std::size_t i = 0; i < n_cells; ++i) {
      if (cells[i]) out.outcomes.push_back(std::move(*cells[i]));
      else
        out.errors.push_back({days[i / templates.size()],
                              mode_label(templates[i % templates.size()]), *failures[i]});
    }
    return out;
  }

  /// Indiscriminate 2-sigma attack on every test day for each omega.
  SweepResult sweep_indiscriminate(const std::string& ticker, const std::vector<std::size_t>& omegas,
                                   std::size_t workers = 1,
                                   Deviation deviation = Deviation::Sample) const {
    if (omegas.empty()) throw AttackError("omega list is empty");
    std::vector<EpSpec> templates;
    for (auto w : omegas) {
      EpSpec ep;
      ep.ticker = ticker;
      ep.mode = EpMode::StdDev;
      ep.omega = w;
      ep.deviation = deviation;
      templates.push_back(ep);
    }
    return sweep(all_days(), templates, workers);
  }

  /// Conceal or Overestimate on selected event days.
  SweepResult run_targeted(const std::string& ticker, const std::vector<std::size_t>& days,
                           EpMode scenario, double drop_fraction = 0.10,
                           std::size_t workers = 1) const {
    if (scenario != EpMode::Conceal && scenario != EpMode::Overestimate)
      throw AttackError("targeted scenario must be conceal or overestimate");
    EpSpec ep;
    ep.ticker = ticker;
    ep.mode = scenario;
    ep.drop_fraction = drop_fraction;
    return sweep(days, {ep}, workers);
  }

  std::vector<std::size_t> all_days() const {
    std::vector<std::size_t> days(test_.days());
    for (std::size_t d = 0; d < days.size(); ++d) days[d] = d;
    return days;
  }

 private:
  const StockSeries& target(const EpSpec& ep) const {
    if (!history_.contains(ep.ticker))
      throw AttackError("ticker '" + ep.ticker + "' is not in the portfolio");
    return history_.at(ep.ticker);
  }

  static double rmse(const std::vector<double>& pred, const StockSeries& actual) {
    double ss = 0;
    for (std::size_t d = 0; d < pred.size(); ++d) {
      const double e = pred[d] - actual.bars[d].close;
      ss += e * e;
    }
    return std::sqrt(ss / double(pred.size()));
  }

  Dataset history_;
  std::size_t test_begin_;
  PredictorSet predictors_;
  StrategyConfig strategy_;
  CostModel cost_;
  Dataset test_;
  PredictionMatrix clean_;
  SimulationResult baseline_;
};

inline std::pair<SimulationResult, AttackOutcome> run_attacked_simulation(
    const AttackHarness& harness, const EpSpec& ep) {
  return harness.run(ep);
}

}  // namespace ephemera
