#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ephemera/attack.hpp"
#include "ephemera/detail/text.hpp"
#include "ephemera/error.hpp"
#include "ephemera/trade_engine.hpp"
#include "json.hpp"

namespace ephemera {

inline constexpr std::string_view kCellsSchema = "ephemera.attack_cells/1";
inline constexpr std::string_view kSummarySchema = "ephemera.attack_summary/1";
inline constexpr std::string_view kQuantilesSchema = "ephemera.quantiles/1";

/// One row of the per-cell attack table.
struct AttackCell {
  std::string ticker;
  std::size_t day = 0;
  std::string date;
  std::string label;  ///< omega for 2-sigma attacks, otherwise the mode name
  double clean_value = 0;
  double perturbed_value = 0;
  double delta_sharpe = 0;
  double cr_ratio = 1;
  double cr_change_pp = 0;
  std::optional<std::size_t> first_divergence_day;
  double rmse_clean = 0;
  double rmse_attacked = 0;

  bool degrades_sharpe() const { return delta_sharpe < 0; }
  bool degrades_cr() const { return cr_ratio < 1; }
};

inline AttackCell to_cell(const AttackOutcome& o, const std::vector<Date>& test_calendar) {
  return {o.ep.ticker,      o.ep.day,       test_calendar.at(o.ep.day).str(),
          mode_label(o.ep), o.clean_value,  o.perturbed_value,
          o.delta_sharpe(), o.cr_ratio,     o.cr_change_pp(),
          o.first_divergence_day, o.rmse_clean, o.rmse_attacked};
}

inline constexpr std::string_view kCellsHeader =
    "ticker,day,date,omega_or_mode,clean_value,perturbed_value,delta_sharpe,cr_ratio,"
    "cr_change_pp,first_divergence_day,rmse_clean,rmse_attacked";

inline void write_cells_csv(std::ostream& out, std::span<const AttackCell> cells) {
  using detail::format_double;
  out << "# schema: " << kCellsSchema << '\n' << kCellsHeader << '\n';
  for (const auto& c : cells) {
    out << c.ticker << ',' << c.day << ',' << c.date << ',' << c.label << ','
        << format_double(c.clean_value) << ',' << format_double(c.perturbed_value) << ','
        << format_double(c.delta_sharpe) << ',' << format_double(c.cr_ratio) << ','
        << format_double(c.cr_change_pp) << ',';
    if (c.first_divergence_day) out << *c.first_divergence_day;
    out << ',' << format_double(c.rmse_clean) << ',' << format_double(c.rmse_attacked) << '\n';
  }
}

inline std::vector<AttackCell> read_cells_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "# schema: " + std::string(kCellsSchema))
    throw ReportError("attack cell file: expected schema line '# schema: " +
                      std::string(kCellsSchema) + "'");
  if (!std::getline(in, line) || detail::trim(line) != kCellsHeader)
    throw ReportError("attack cell file: header does not match '" + std::string(kCellsHeader) +
                      "'");
  static const char* kNames[] = {"ticker",       "day",          "date",
                                 "omega_or_mode", "clean_value",  "perturbed_value",
                                 "delta_sharpe", "cr_ratio",     "cr_change_pp",
                                 "first_divergence_day", "rmse_clean", "rmse_attacked"};
  std::vector<AttackCell> cells;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split_fields(detail::trim(line));
    if (f.size() != 12)
      throw ReportError("attack cell file line " + std::to_string(line_no) + ": expected 12 fields");
    auto num = [&](std::size_t i) {
      auto v = detail::parse_double(f[i]);
      if (!v)
        throw ReportError("attack cell file line " + std::to_string(line_no) + ": field '" +
                          kNames[i] + "' is not a number");
      return *v;
    };
    AttackCell c;
    c.ticker = std::string(f[0]);
    c.day = static_cast<std::size_t>(num(1));
    c.date = std::string(f[2]);
    c.label = std::string(f[3]);
    c.clean_value = num(4);
    c.perturbed_value = num(5);
    c.delta_sharpe = num(6);
    c.cr_ratio = num(7);
    c.cr_change_pp = num(8);
    if (!f[9].empty()) c.first_divergence_day = static_cast<std::size_t>(num(9));
    c.rmse_clean = num(10);
    c.rmse_attacked = num(11);
    cells.push_back(std::move(c));
  }
  if (cells.empty()) throw ReportError("attack cell file contains no outcomes");
  return cells;
}

struct Quantiles {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

/// Linearly interpolated quantile of sorted data (position p * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) throw ReportError("cannot summarise an empty distribution");
  std::sort(values.begin(), values.end());
  Quantiles q;
  q.count = values.size();
  q.min = values.front();
  q.max = values.back();
  q.q1 = quantile_sorted(values, 0.25);
  q.median = quantile_sorted(values, 0.5);
  q.q3 = quantile_sorted(values, 0.75);
  double s = 0;
  for (double v : values) s += v;
  q.mean = s / double(values.size());
  return q;
}

struct DegradationSummary {
  std::size_t cells = 0;
  double fraction_sharpe_degraded = 0;
  double fraction_cr_degraded = 0;
  std::size_t zero_impact = 0;  ///< cells whose ledger never diverged
};

inline DegradationSummary summarize(std::span<const AttackCell> cells) {
  DegradationSummary s;
  s.cells = cells.size();
  if (cells.empty()) return s;
  std::size_t sr = 0, cr = 0;
  for (const auto& c : cells) {
    sr += c.degrades_sharpe();
    cr += c.degrades_cr();
    s.zero_impact += !c.first_divergence_day.has_value();
  }
  s.fraction_sharpe_degraded = double(sr) / double(cells.size());
  s.fraction_cr_degraded = double(cr) / double(cells.size());
  return s;
}

/// Groups cells by omega/mode label, preserving first-seen order.
inline std::vector<std::pair<std::string, std::vector<AttackCell>>> group_by_label(
    std::span<const AttackCell> cells) {
  std::vector<std::pair<std::string, std::vector<AttackCell>>> groups;
  for (const auto& c : cells) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == c.label; });
    if (it == groups.end()) groups.push_back({c.label, {c}});
    else it->second.push_back(c);
  }
  return groups;
}

inline nlohmann::ordered_json summary_json(const SimulationResult& baseline,
                                           std::span<const AttackCell> cells,
                                           std::span<const CellError> errors) {
  auto to_j = [](const DegradationSummary& s) {
    return nlohmann::ordered_json{{"cells", s.cells},
                                  {"fraction_sharpe_degraded", s.fraction_sharpe_degraded},
                                  {"fraction_cr_degraded", s.fraction_cr_degraded},
                                  {"zero_impact_cells", s.zero_impact}};
  };
  nlohmann::ordered_json by_label = nlohmann::ordered_json::object();
  for (const auto& [label, group] : group_by_label(cells)) by_label[label] = to_j(summarize(group));
  nlohmann::ordered_json errs = nlohmann::ordered_json::array();
  for (const auto& e : errors)
    errs.push_back({{"day", e.day}, {"omega_or_mode", e.label}, {"message", e.message}});
  auto overall = to_j(summarize(cells));
  return {{"schema", kSummarySchema},
          {"baseline",
           {{"sharpe_ratio", baseline.sharpe.value},
            {"sharpe_zero_volatility", baseline.sharpe.zero_volatility},
            {"cumulative_return", baseline.final_cumulative_return()},
            {"final_value", baseline.final_value}}},
          {"overall", overall},
          {"by_omega_or_mode", by_label},
          {"errors", errs}};
}

inline void write_quantile_table(std::ostream& out, std::span<const AttackCell> cells) {
  using detail::format_double;
  out << "# schema: " << kQuantilesSchema << '\n'
      << "metric,omega_or_mode,count,min,q1,median,q3,max,mean\n";
  for (const auto& [label, group] : group_by_label(cells)) {
    std::vector<double> ds, cr;
    for (const auto& c : group) {
      ds.push_back(c.delta_sharpe);
      cr.push_back(c.cr_ratio);
    }
    for (auto [metric, values] : {std::pair{"delta_sharpe", &ds}, {"cr_ratio", &cr}}) {
      const auto q = quantiles(*values);
      out << metric << ',' << label << ',' << q.count << ',' << format_double(q.min) << ','
          << format_double(q.q1) << ',' << format_double(q.median) << ','
          << format_double(q.q3) << ',' << format_double(q.max) << ','
          << format_double(q.mean) << '\n';
    }
  }
}

}  // namespace ephemera
