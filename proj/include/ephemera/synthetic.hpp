#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ephemera/market_data.hpp"

namespace ephemera::synthetic {

/// Portable normal/uniform draws on top of mt19937_64, so generated data is
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Weekdays starting at `start`.
inline std::vector<Date> business_days(Date start, std::size_t n) {
  std::vector<Date> out;
  auto day = start.days();
  while (out.size() < n) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday)
      out.emplace_back(std::chrono::year_month_day{day});
    day += std::chrono::days{1};
  }
  return out;
}

struct SeriesParams {
  double start_price = 100.0;
  double drift = 0.0003;
  double volatility = 0.015;
  /// AR(1) coefficient of daily log-returns; 0 gives a plain random walk.
  double momentum = 0.0;
  double base_volume = 1.0e6;
};

inline StockSeries generate(const std::string& ticker, const std::vector<Date>& calendar,
                            const SeriesParams& p, std::uint64_t seed) {
  Rng rng(seed);
  StockSeries s{ticker, {}};
  s.bars.reserve(calendar.size());
  double close = p.start_price;
  double prev_ret = 0;
  for (const auto& date : calendar) {
    const double ret = p.drift + p.momentum * prev_ret + p.volatility * rng.normal();
    prev_ret = ret;
    const double open = close * std::exp(0.3 * p.volatility * rng.normal());
    close = close * std::exp(ret);
    Bar b;
    b.date = date;
    b.open = open;
    b.close = close;
    b.high = std::max(open, close) * (1.0 + 0.5 * p.volatility * std::abs(rng.normal()));
    b.low = std::min(open, close) * (1.0 - 0.5 * p.volatility * std::abs(rng.normal()));
    b.volume = std::round(p.base_volume * std::exp(0.25 * rng.normal()));
    s.bars.push_back(b);
  }
  return s;
}

/// A small aligned portfolio with per-ticker parameters derived from the seed.
inline Dataset portfolio(const std::vector<std::string>& tickers, std::size_t days,
                         std::uint64_t seed, double momentum = 0.1) {
  const auto calendar = business_days(Date(2020, 1, 2), days);
  std::vector<StockSeries> all;
  Rng meta(seed);
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    SeriesParams p;
    p.start_price = meta.uniform(20.0, 300.0);
    p.drift = meta.uniform(-0.0005, 0.001);
    p.volatility = meta.uniform(0.008, 0.025);
    p.momentum = momentum;
    all.push_back(generate(tickers[i], calendar, p, seed * 1000003ULL + i + 1));
  }
  return align_calendar(std::move(all));
}

}  // namespace ephemera::synthetic
