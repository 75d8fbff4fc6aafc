#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ephemera/date.hpp"
#include "ephemera/detail/text.hpp"
#include "ephemera/error.hpp"

namespace ephemera {

struct Bar {
  Date date;
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  double volume = 0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

/// Returns a description of the first violated invariant, if any.
inline std::optional<std::string> bar_violation(const Bar& b) {
  for (double p : {b.open, b.high, b.low, b.close})
    if (!std::isfinite(p) || p <= 0) return "prices must be finite and positive";
  if (!std::isfinite(b.volume) || b.volume < 0) return "volume must be nonnegative";
  if (b.low > std::min(b.open, b.close)) return "low exceeds min(open, close)";
  if (b.high < std::max(b.open, b.close)) return "high below max(open, close)";
  return std::nullopt;
}

struct StockSeries {
  std::string ticker;
  std::vector<Bar> bars;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }

  std::vector<double> closes() const {
    std::vector<double> out;
    out.reserve(bars.size());
    for (const auto& b : bars) out.push_back(b.close);
    return out;
  }

  std::optional<std::size_t> index_of(const Date& d) const {
    auto it = std::lower_bound(bars.begin(), bars.end(), d,
                               [](const Bar& b, const Date& x) { return b.date < x; });
    if (it == bars.end() || it->date != d) return std::nullopt;
    return static_cast<std::size_t>(it - bars.begin());
  }

  friend bool operator==(const StockSeries&, const StockSeries&) = default;
};

/// Synchronous per-ticker histories. `series` is sorted by ticker and every
/// member has exactly one bar per calendar day.
struct Dataset {
  std::vector<Date> calendar;
  std::vector<StockSeries> series;

  std::size_t days() const { return calendar.size(); }

  const StockSeries& at(const std::string& ticker) const {
    for (const auto& s : series)
      if (s.ticker == ticker) return s;
    throw Error("market_data", "unknown ticker '" + ticker + "'");
  }

  bool contains(const std::string& ticker) const {
    return std::any_of(series.begin(), series.end(),
                       [&](const StockSeries& s) { return s.ticker == ticker; });
  }

  std::optional<std::size_t> index_of(const Date& d) const {
    auto it = std::lower_bound(calendar.begin(), calendar.end(), d);
    if (it == calendar.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - calendar.begin());
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t window = 50;
};

/// Result of a temporal cut. `test_begin` is the index of the first test day
/// in the calendar of the dataset that was split.
struct Partition {
  Dataset train;
  Dataset test;
  std::size_t test_begin = 0;
};

// ---------------------------------------------------------------------------
// CSV ingestion

inline StockSeries parse_csv(std::istream& in, const std::string& ticker) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  int c_date = -1, c_open = -1, c_high = -1, c_low = -1, c_close = -1, c_volume = -1;
  std::size_t n_cols = 0;
  StockSeries out{ticker, {}};

  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    auto fields = detail::split_fields(trimmed);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& f = fields[i];
        int idx = static_cast<int>(i);
        if (f == "Date") c_date = idx;
        else if (f == "Open") c_open = idx;
        else if (f == "High") c_high = idx;
        else if (f == "Low") c_low = idx;
        else if (f == "Close") c_close = idx;
        else if (f == "Volume") c_volume = idx;
      }
      for (auto [name, col] : {std::pair{"Date", c_date}, {"Open", c_open}, {"High", c_high},
                               {"Low", c_low}, {"Close", c_close}, {"Volume", c_volume}})
        if (col < 0)
          throw ParseError(line_no, std::string("header is missing column '") + name + "'");
      n_cols = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != n_cols)
      throw ParseError(line_no, "expected " + std::to_string(n_cols) + " fields, got " +
                                    std::to_string(fields.size()));
    Bar bar;
    auto date = Date::parse(fields[c_date]);
    if (!date)
      throw ParseError(line_no, "invalid date '" + std::string(fields[c_date]) +
                                    "' (expected YYYY-MM-DD)");
    bar.date = *date;
    auto num = [&](int col, const char* name) {
      auto v = detail::parse_double(fields[col]);
      if (!v)
        throw ParseError(line_no, std::string("invalid ") + name + " '" +
                                      std::string(fields[col]) + "'");
      return *v;
    };
    bar.open = num(c_open, "Open");
    bar.high = num(c_high, "High");
    bar.low = num(c_low, "Low");
    bar.close = num(c_close, "Close");
    bar.volume = num(c_volume, "Volume");
    if (auto why = bar_violation(bar))
      throw ValidationError(ticker + " " + bar.date.str() + ": " + *why);
    out.bars.push_back(bar);
  }

  if (out.bars.empty())
    throw EmptyInputError(ticker + ": no data rows" + (have_header ? "" : " and no header"));

  std::stable_sort(out.bars.begin(), out.bars.end(),
                   [](const Bar& a, const Bar& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.bars.size(); ++i)
    if (out.bars[i].date == out.bars[i - 1].date)
      throw ValidationError(ticker + " " + out.bars[i].date.str() + ": duplicate date");
  return out;
}

inline StockSeries load_csv(const std::string& path, const std::string& ticker) {
  std::ifstream in(path);
  if (!in) throw Error("market_data", "cannot open '" + path + "'");
  return parse_csv(in, ticker);
}

inline void write_csv(std::ostream& out, const StockSeries& series) {
  out << "Date,Open,High,Low,Close,Volume\n";
  for (const auto& b : series.bars)
    out << b.date.str() << ',' << detail::format_double(b.open) << ','
        << detail::format_double(b.high) << ',' << detail::format_double(b.low) << ','
        << detail::format_double(b.close) << ',' << detail::format_double(b.volume) << '\n';
}

// ---------------------------------------------------------------------------
// Alignment, splitting, windows

/// Restricts every series to the intersection of their dates.
inline Dataset align_calendar(std::vector<StockSeries> series_set) {
  if (series_set.empty()) throw AlignmentError("no series to align");
  for (const auto& s : series_set)
    if (s.empty()) throw AlignmentError("series '" + s.ticker + "' is empty");

  std::sort(series_set.begin(), series_set.end(),
            [](const StockSeries& a, const StockSeries& b) { return a.ticker < b.ticker; });
  for (std::size_t i = 1; i < series_set.size(); ++i)
    if (series_set[i].ticker == series_set[i - 1].ticker)
      throw AlignmentError("ticker '" + series_set[i].ticker + "' given twice");

  std::vector<Date> common;
  for (const auto& b : series_set.front().bars) common.push_back(b.date);
  for (std::size_t i = 1; i < series_set.size(); ++i) {
    std::vector<Date> dates, next;
    for (const auto& b : series_set[i].bars) dates.push_back(b.date);
    std::set_intersection(common.begin(), common.end(), dates.begin(), dates.end(),
                          std::back_inserter(next));
    common = std::move(next);
  }
  if (common.empty()) {
    std::string names;
    for (const auto& s : series_set) names += (names.empty() ? "" : ", ") + s.ticker;
    throw AlignmentError("no common trading days across tickers: " + names);
  }

  Dataset out;
  out.calendar = common;
  for (auto& s : series_set) {
    StockSeries trimmed{s.ticker, {}};
    trimmed.bars.reserve(common.size());
    std::size_t j = 0;
    for (const auto& b : s.bars) {
      if (j < common.size() && b.date == common[j]) {
        trimmed.bars.push_back(b);
        ++j;
      }
    }
    out.series.push_back(std::move(trimmed));
  }
  return out;
}

/// Days [begin, end) of every series.
inline Dataset slice(const Dataset& d, std::size_t begin, std::size_t end) {
  Dataset out;
  out.calendar.assign(d.calendar.begin() + begin, d.calendar.begin() + end);
  for (const auto& s : d.series)
    out.series.push_back({s.ticker, {s.bars.begin() + begin, s.bars.begin() + end}});
  return out;
}

inline void validate(const SplitSpec& spec) {
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1))
    throw ConfigError("market_data", "train_fraction must lie in (0, 1)");
  if (spec.window < 1) throw ConfigError("market_data", "window must be positive");
}

/// Temporal cut: the first floor(fraction * N) days train, the rest test.
inline Partition split(const Dataset& dataset, const SplitSpec& spec) {
  validate(spec);
  const auto n = dataset.days();
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * double(n)));
  if (n_train < spec.window)
    throw ConfigError("market_data", "train partition has " + std::to_string(n_train) +
                                         " days, fewer than window " +
                                         std::to_string(spec.window));
  if (n_train >= n) throw ConfigError("market_data", "test partition is empty");
  return {slice(dataset, 0, n_train), slice(dataset, n_train, n), n_train};
}

/// The `w` bars ending at day `t` inclusive.
inline std::span<const Bar> window(const StockSeries& series, std::size_t t, std::size_t w) {
  if (w == 0) throw WindowError("window length must be positive");
  if (t >= series.size())
    throw WindowError(series.ticker + ": day " + std::to_string(t) + " beyond history of " +
                      std::to_string(series.size()) + " bars");
  if (t + 1 < w)
    throw WindowError(series.ticker + ": day " + std::to_string(t) +
                      " has insufficient history for window " + std::to_string(w));
  return std::span<const Bar>(series.bars).subspan(t + 1 - w, w);
}

}  // namespace ephemera
