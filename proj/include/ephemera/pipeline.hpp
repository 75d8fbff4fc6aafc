#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ephemera/attack.hpp"
#include "ephemera/config.hpp"
#include "ephemera/market_data.hpp"
#include "ephemera/parallel.hpp"
#include "ephemera/predictor.hpp"
#include "ephemera/report.hpp"
#include "ephemera/strategy.hpp"
#include "ephemera/trade_engine.hpp"
#include "json.hpp"

// Orchestration behind the command-line tool: ingest -> fit -> backtest ->
// attack -> report. Each command writes its artifacts into the output
// directory from a single thread.
namespace ephemera::pipeline {

inline constexpr std::string_view kIngestSchema = "ephemera.ingest/1";
inline constexpr std::string_view kFitSchema = "ephemera.fit_report/1";

namespace fs = std::filesystem;

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("report", "cannot write '" + path.string() + "'");
  out << content;
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

struct Prepared {
  Dataset full;
  Partition partition;
};

inline Prepared prepare(const RunConfig& cfg) {
  std::vector<StockSeries> all;
  for (const auto& t : cfg.tickers)
    all.push_back(load_csv((fs::path(cfg.data_dir) / (t + ".csv")).string(), t));
  Prepared p;
  p.full = align_calendar(std::move(all));
  p.partition = split(p.full, cfg.split);
  return p;
}

// ---------------------------------------------------------------------------

struct IngestSummary {
  std::vector<std::string> tickers;
  std::size_t days = 0, train_days = 0, test_days = 0;
  std::string first, last, test_first;
};

inline IngestSummary cmd_ingest(const RunConfig& cfg, const fs::path& out_dir) {
  const auto p = prepare(cfg);
  IngestSummary s;
  for (const auto& series : p.full.series) s.tickers.push_back(series.ticker);
  s.days = p.full.days();
  s.train_days = p.partition.train.days();
  s.test_days = p.partition.test.days();
  s.first = p.full.calendar.front().str();
  s.last = p.full.calendar.back().str();
  s.test_first = p.partition.test.calendar.front().str();
  write_file(out_dir / "ingest.json",
             dump({{"schema", kIngestSchema},
                   {"tickers", s.tickers},
                   {"days", s.days},
                   {"first_date", s.first},
                   {"last_date", s.last},
                   {"train_days", s.train_days},
                   {"test_days", s.test_days},
                   {"test_first_date", s.test_first}}));
  return s;
}

// ---------------------------------------------------------------------------

inline PredictorSet fit_all(const Dataset& train, const PredictorConfig& config, std::size_t workers) {
  std::vector<std::optional<LinearPredictor>> slots(train.series.size());
  parallel_for(train.series.size(), workers, [&](std::size_t i) {
    slots[i] = LinearPredictor::fit(train.series[i], config);
  });
  PredictorSet out;
  for (std::size_t i = 0; i < slots.size(); ++i)
    out.emplace(train.series[i].ticker, std::move(*slots[i]));
  return out;
}

/// Test-window forecasts per ticker, keyed by test-day index.
inline std::map<std::string, PredictionSeries> forecasts(const Prepared& p, const PredictorSet& set) {
  std::map<std::string, PredictionSeries> out;
  for (const auto& s : p.full.series)
    out.emplace(s.ticker, forecast(set.at(s.ticker), s, p.partition.test_begin,
                                   p.partition.test.days()));
  return out;
}

inline std::map<std::string, PredictionSeries> imported_forecasts(const Prepared& p,
                                                                  const std::string& dir) {
  std::map<std::string, PredictionSeries> out;
  const auto begin = p.partition.test_begin;
  for (const auto& s : p.full.series) {
    auto full = import_predictions((fs::path(dir) / (s.ticker + ".csv")).string(),
                                   p.full.calendar, s.ticker);
    PredictionSeries test{s.ticker, {full.values.begin() + long(begin), full.values.end()}};
    out.emplace(s.ticker, std::move(test));
  }
  return out;
}

inline std::vector<FitReport> cmd_fit(const RunConfig& cfg, const fs::path& out_dir,
                                      std::size_t workers) {
  const auto p = prepare(cfg);
  const auto set = fit_all(p.partition.train, cfg.predictor, workers);
  const auto preds = forecasts(p, set);
  std::vector<FitReport> reports;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : p.partition.test.series) {
    const auto& pred = preds.at(s.ticker);
    FitReport r{s.ticker, evaluate_rmse(pred, s, 0, s.size()), set.at(s.ticker).n_train_samples(),
                s.size()};
    arr.push_back(
        {{"ticker", r.ticker}, {"rmse_test", r.rmse_test}, {"n_train", r.n_train}, {"n_test", r.n_test}});
    std::ostringstream csv;
    write_predictions(csv, pred, p.partition.test.calendar);
    write_file(out_dir / "predictions" / (s.ticker + ".csv"), csv.str());
    reports.push_back(std::move(r));
  }
  write_file(out_dir / "fit_report.json", dump({{"schema", kFitSchema}, {"reports", arr}}));
  return reports;
}

// ---------------------------------------------------------------------------

inline void write_backtest(const fs::path& out_dir, const std::string& stem,
                           const SimulationResult& r, const std::vector<Date>& calendar) {
  write_file(out_dir / (stem + ".json"), dump(to_json(r)));
  std::ostringstream ledger, metrics;
  write_ledger_csv(ledger, r, calendar);
  write_metrics_csv(metrics, r, calendar);
  write_file(out_dir / (stem + "_ledger.csv"), ledger.str());
  write_file(out_dir / (stem + "_metrics.csv"), metrics.str());
}

inline SimulationResult cmd_backtest(const RunConfig& cfg, const fs::path& out_dir,
                                     std::size_t workers) {
  const auto p = prepare(cfg);
  const auto preds = cfg.predictions_dir
                         ? imported_forecasts(p, *cfg.predictions_dir)
                         : forecasts(p, fit_all(p.partition.train, cfg.predictor, workers));
  auto result = run_simulation(p.partition.test, preds, cfg.strategy, cfg.costs);
  write_backtest(out_dir, "result", result, p.partition.test.calendar);
  return result;
}

// ---------------------------------------------------------------------------

enum class AttackKind { Sweep, Targeted };

struct AttackRun {
  SimulationResult baseline;
  std::vector<AttackCell> cells;
  std::vector<CellError> errors;
};

inline std::vector<std::size_t> resolve_days(const std::vector<DayRef>& refs,
                                             const Dataset& test) {
  std::vector<std::size_t> out;
  for (const auto& r : refs) {
    if (auto* i = std::get_if<std::size_t>(&r)) {
      if (*i >= test.days())
        throw AttackError("day " + std::to_string(*i) + " is outside the test window of " +
                          std::to_string(test.days()) + " days");
      out.push_back(*i);
    } else {
      auto idx = test.index_of(std::get<Date>(r));
      if (!idx)
        throw AttackError("date " + std::get<Date>(r).str() + " is not a test-window trading day");
      out.push_back(*idx);
    }
  }
  return out;
}

/// `tickers` overrides the attack block's ticker when nonempty.
inline AttackRun cmd_attack(const RunConfig& cfg, AttackKind kind, const fs::path& out_dir,
                            std::size_t workers, std::vector<std::string> tickers = {}) {
  if (!cfg.attack) throw ConfigError("config", "attack block is required for the attack command");
  if (cfg.predictions_dir)
    throw ConfigError("attack", "attacks need fitted predictors; imported predictions cannot be "
                                "re-evaluated on perturbed windows");
  const auto& a = *cfg.attack;
  if (tickers.empty()) tickers.push_back(a.ticker);
  if (kind == AttackKind::Targeted && a.mode != EpMode::Conceal && a.mode != EpMode::Overestimate)
    throw ConfigError("attack", "targeted attacks use mode conceal or overestimate");
  if (kind == AttackKind::Targeted && !a.days)
    throw ConfigError("attack", "targeted attacks need an explicit days list");

  auto p = prepare(cfg);
  auto set = fit_all(p.partition.train, cfg.predictor, workers);
  const AttackHarness harness(p.full, p.partition.test_begin, std::move(set), cfg.strategy,
                              cfg.costs);
  const auto days = a.days ? resolve_days(*a.days, harness.test()) : harness.all_days();

  AttackRun run;
  run.baseline = harness.baseline();
  for (const auto& ticker : tickers) {
    if (!harness.history().contains(ticker))
      throw ConfigError("attack", "ticker '" + ticker + "' is not in the portfolio");
    std::vector<EpSpec> templates;
    EpSpec base;
    base.ticker = ticker;
    base.mode = a.mode;
    base.drop_fraction = a.drop_fraction;
    base.value = a.value;
    base.deviation = a.deviation;
    if (a.mode == EpMode::StdDev) {
      for (auto w : a.omegas) {
        base.omega = w;
        templates.push_back(base);
      }
    } else {
      templates.push_back(base);
    }
    auto sweep = harness.sweep(days, templates, workers);
    for (const auto& o : sweep.outcomes) run.cells.push_back(to_cell(o, harness.test().calendar));
    for (auto& e : sweep.errors) {
      e.message = ticker + ": " + e.message;
      run.errors.push_back(std::move(e));
    }
  }

  std::ostringstream cells;
  write_cells_csv(cells, run.cells);
  write_file(out_dir / "attack_cells.csv", cells.str());
  write_file(out_dir / "attack_summary.json", dump(summary_json(run.baseline, run.cells, run.errors)));
  write_backtest(out_dir, "baseline", run.baseline, harness.test().calendar);
  return run;
}

// ---------------------------------------------------------------------------

/// Reads a simulation result (`*.json`) and/or an attack cell table (`*.csv`),
/// prints a summary, and writes `quantiles.csv` when cells are present.
inline std::string cmd_report(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  if (inputs.empty()) throw ReportError("no input files");
  std::optional<SimulationResult> baseline;
  std::vector<AttackCell> cells;
  bool have_cells = false;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw ReportError("cannot open '" + path.string() + "'");
    if (path.extension() == ".json") {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ReportError(path.string() + ": invalid JSON: " + e.what());
      }
      baseline = simulation_result_from_json(j);
    } else if (path.extension() == ".csv") {
      auto more = read_cells_csv(in);
      cells.insert(cells.end(), more.begin(), more.end());
      have_cells = true;
    } else {
      throw ReportError("unrecognised input '" + path.string() + "' (expected .json or .csv)");
    }
  }

  std::ostringstream text;
  text.setf(std::ios::fixed);
  text.precision(4);
  if (baseline) {
    text << "baseline: sharpe " << baseline->sharpe.value
         << (baseline->sharpe.zero_volatility ? " (zero volatility)" : "")
         << ", cumulative return " << baseline->final_cumulative_return() * 100.0 << "%"
         << ", final value " << baseline->final_value << ", trades " << baseline->trades.size()
         << '\n';
  }
  if (have_cells) {
    const auto all = summarize(cells);
    text << "attacks: " << all.cells << " cells, sharpe degraded in "
         << all.fraction_sharpe_degraded * 100.0 << "%, cumulative return degraded in "
         << all.fraction_cr_degraded * 100.0 << "%, zero-impact " << all.zero_impact << '\n';
    for (const auto& [label, group] : group_by_label(cells)) {
      const auto s = summarize(group);
      const auto q = quantiles([&] {
        std::vector<double> v;
        for (const auto& c : group) v.push_back(c.delta_sharpe);
        return v;
      }());
      text << "  " << label << ": " << s.cells << " cells, sharpe degraded "
           << s.fraction_sharpe_degraded * 100.0 << "%, cr degraded "
           << s.fraction_cr_degraded * 100.0 << "%, median delta sharpe " << q.median << '\n';
    }
    std::ostringstream table;
    write_quantile_table(table, cells);
    write_file(out_dir / "quantiles.csv", table.str());
  }
  return text.str();
}

}  // namespace ephemera::pipeline
