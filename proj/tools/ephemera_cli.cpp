// Command-line front end: ingest, fit, backtest, attack, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ephemera/ephemera.hpp"

namespace fs = std::filesystem;
using namespace ephemera;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out_dir, "Output directory (overrides output_dir)");
  cmd->add_option("--workers", c.workers, "Worker threads (overrides workers)");
}

RunConfig load(const Common& c) {
  auto cfg = load_config(c.config_path);
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  if (c.workers > 0) cfg.workers = c.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backtesting and ephemeral-perturbation attack harness for trading systems"};
  app.require_subcommand(1);

  Common ingest_opts, fit_opts, backtest_opts, attack_opts;
  auto* ingest = app.add_subcommand("ingest", "Validate, align and split the market data");
  add_common(ingest, ingest_opts);
  auto* fit = app.add_subcommand("fit", "Fit baseline predictors and report test RMSE");
  add_common(fit, fit_opts);
  auto* backtest = app.add_subcommand("backtest", "Run the clean backtest over the test window");
  add_common(backtest, backtest_opts);

  auto* attack = app.add_subcommand("attack", "Run ephemeral-perturbation attacks");
  std::string attack_kind = "sweep";
  std::vector<std::string> attack_tickers;
  std::vector<std::size_t> omegas;
  std::string mode;
  attack->add_option("kind", attack_kind, "sweep | targeted")
      ->check(CLI::IsMember({"sweep", "targeted"}));
  add_common(attack, attack_opts);
  attack->add_option("--ticker", attack_tickers, "Attacked ticker (repeatable)");
  attack->add_option("--omega", omegas, "Attacker window guess (repeatable)");
  attack->add_option("--mode", mode, "stddev | conceal | overestimate | custom | null");

  auto* report = app.add_subcommand("report", "Summarise result and attack files");
  std::vector<std::string> report_inputs;
  std::string report_out = ".";
  report->add_option("inputs", report_inputs, "result JSON and/or attack cell CSV files")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Directory for quantiles.csv");

  auto* synth = app.add_subcommand("synth", "Write a synthetic OHLCV portfolio for demos");
  std::vector<std::string> synth_tickers{"AAA", "BBB", "CCC"};
  std::size_t synth_days = 400;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "data";
  synth->add_option("--tickers", synth_tickers)->delimiter(',');
  synth->add_option("--days", synth_days);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto cfg = load(ingest_opts);
      const auto s = pipeline::cmd_ingest(cfg, cfg.output_dir);
      std::cout << s.tickers.size() << " tickers, " << s.days << " common days (" << s.first
                << " .. " << s.last << "); train " << s.train_days << ", test " << s.test_days
                << " from " << s.test_first << '\n';
    } else if (*fit) {
      const auto cfg = load(fit_opts);
      for (const auto& r : pipeline::cmd_fit(cfg, cfg.output_dir, cfg.workers))
        std::cout << r.ticker << ": rmse_test " << r.rmse_test << " (" << r.n_train
                  << " train samples, " << r.n_test << " test days)\n";
    } else if (*backtest) {
      const auto cfg = load(backtest_opts);
      const auto r = pipeline::cmd_backtest(cfg, cfg.output_dir, cfg.workers);
      std::cout << "sharpe " << r.sharpe.value
                << (r.sharpe.zero_volatility ? " (zero volatility)" : "") << ", cumulative return "
                << r.final_cumulative_return() * 100.0 << "%, final value " << r.final_value
                << ", trades " << r.trades.size() << '\n';
    } else if (*attack) {
      auto cfg = load(attack_opts);
      if (!cfg.attack) throw ConfigError("config", "attack block is required");
      if (!omegas.empty()) cfg.attack->omegas = omegas;
      if (!mode.empty()) {
        auto m = parse_ep_mode(mode);
        if (!m) throw ConfigError("cli", "unknown --mode '" + mode + "'");
        cfg.attack->mode = *m;
      }
      const auto kind =
          attack_kind == "targeted" ? pipeline::AttackKind::Targeted : pipeline::AttackKind::Sweep;
      const auto run = pipeline::cmd_attack(cfg, kind, cfg.output_dir, cfg.workers, attack_tickers);
      const auto s = summarize(run.cells);
      std::cout << s.cells << " attacked runs (" << run.errors.size()
                << " infeasible), sharpe degraded in " << s.fraction_sharpe_degraded * 100.0
                << "%, cumulative return degraded in " << s.fraction_cr_degraded * 100.0 << "%\n";
    } else if (*report) {
      std::vector<fs::path> paths(report_inputs.begin(), report_inputs.end());
      std::cout << pipeline::cmd_report(paths, report_out);
    } else if (*synth) {
      const auto data = synthetic::portfolio(synth_tickers, synth_days, synth_seed);
      for (const auto& s : data.series) {
        std::ostringstream csv;
        write_csv(csv, s);
        pipeline::write_file(fs::path(synth_out) / (s.ticker + ".csv"), csv.str());
      }
      std::cout << "wrote " << data.series.size() << " series of " << data.days() << " days to "
                << synth_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
