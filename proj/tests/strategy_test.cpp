#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ephemera/strategy.hpp"

using namespace ephemera;

namespace {

std::vector<double> random_walk(std::mt19937_64& rng, std::size_t n, double start = 100) {
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> v(n);
  double x = start;
  for (auto& e : v) {
    x = std::max(1.0, x + step(rng));
    e = x;
  }
  return v;
}

std::size_t count(const std::vector<Signal>& s, Signal which) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), which));
}

}  // namespace

TEST(MaCrossover, ConstantStreamHolds) {
  for (double c : {10.0, 10.3, 1234.56789})
    EXPECT_EQ(count(ma_crossover_signals(std::vector<double>(80, c), {}), Signal::Hold), 80u);
}

TEST(MaCrossover, StepUpFiresOneBuy) {
  std::vector<double> p(35, 10.0);
  std::fill(p.begin() + 20, p.end(), 20.0);
  // Oracle: first day whose 5-day mean exceeds its 20-day mean.
  std::size_t expected = 0;
  for (std::size_t d = 19; d < p.size(); ++d) {
    double s = 0, l = 0;
    for (std::size_t k = d - 4; k <= d; ++k) s += p[k];
    for (std::size_t k = d - 19; k <= d; ++k) l += p[k];
    if (s / 5 > l / 20) {
      expected = d;
      break;
    }
  }
  ASSERT_EQ(expected, 20u);
  const auto sig = ma_crossover_signals(p, {});
  EXPECT_EQ(count(sig, Signal::Buy), 1u);
  EXPECT_EQ(sig[expected], Signal::Buy);
  EXPECT_EQ(count(sig, Signal::Sell), 0u);
}

TEST(MaCrossover, TieAfterCatchUpCountsAsNotAbove) {
  std::vector<double> p(45, 10.0);
  std::fill(p.begin() + 20, p.end(), 20.0);
  const auto sig = ma_crossover_signals(p, {});
  // Day 39 is the first day both averages are 20 again.
  EXPECT_EQ(sig[39], Signal::Sell);
  EXPECT_EQ(count(sig, Signal::Sell), 1u);
}

TEST(MaCrossover, HoldsUntilBothAveragesAndAPreviousDayExist) {
  std::mt19937_64 rng(3);
  const auto p = random_walk(rng, 25);
  const auto sig = ma_crossover_signals(p, {});
  for (std::size_t d = 0; d < 20; ++d) EXPECT_EQ(sig[d], Signal::Hold);
}

TEST(MaCrossover, BuysAndSellsAlternate) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto sig = ma_crossover_signals(random_walk(rng, 300), {});
    Signal last = Signal::Hold;
    for (auto s : sig) {
      if (s == Signal::Hold) continue;
      EXPECT_NE(s, last);
      last = s;
    }
  }
}

TEST(Roc, ThresholdExamples) {
  StrategyConfig cfg;
  cfg.kind = StrategyKind::RateOfChange;
  std::vector<double> closes(16, 100.0), preds(16, 100.0);
  preds[14] = 101.5;
  preds[15] = 98.9;
  EXPECT_DOUBLE_EQ(rate_of_change(101.5, 100), 1.5);
  EXPECT_NEAR(rate_of_change(98.9, 100), -1.1, 1e-12);
  const auto sig = roc_signals(closes, preds, cfg);
  EXPECT_EQ(sig[14], Signal::Buy);
  EXPECT_EQ(sig[15], Signal::Sell);
  for (std::size_t d = 0; d < 14; ++d) EXPECT_EQ(sig[d], Signal::Hold);
}

TEST(Roc, ConstantSeriesHolds) {
  std::vector<double> c(40, 55.0);
  EXPECT_EQ(count(roc_signals(c, c, {}), Signal::Hold), 40u);
}

TEST(Roc, BoundaryValuesHold) {
  std::vector<double> closes(15, 100.0), preds(15, 100.0);
  preds[14] = 101.0;  // ROC exactly +1
  EXPECT_EQ(roc_signals(closes, preds, {})[14], Signal::Hold);
  preds[14] = 99.0;  // ROC exactly -1
  EXPECT_EQ(roc_signals(closes, preds, {})[14], Signal::Hold);
}

TEST(Roc, CloseSourceUsesActualCloses) {
  StrategyConfig cfg;
  cfg.roc_source = RocSource::Close;
  std::vector<double> closes(15, 100.0), preds(15, 200.0);
  closes[14] = 98.0;
  EXPECT_EQ(roc_signals(closes, preds, cfg)[14], Signal::Sell);
}

TEST(Roc, ScaleFree) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_walk(rng, 120);
    auto p = random_walk(rng, 120);
    const auto base = roc_signals(c, p, {});
    for (double k : {0.25, 2.0, 1024.0}) {
      auto cs = c, ps = p;
      for (auto& x : cs) x *= k;
      for (auto& x : ps) x *= k;
      EXPECT_EQ(roc_signals(cs, ps, {}), base);
    }
  }
}

TEST(Bollinger, DegenerateBandHolds) {
  std::vector<double> c(25, 42.0);
  EXPECT_EQ(count(bollinger_signals(c, c, {}), Signal::Hold), 25u);
}

TEST(Bollinger, AlternatingHistory) {
  std::vector<double> closes(21), preds(21, 10.0);
  for (std::size_t i = 0; i < 20; ++i) closes[i] = i % 2 ? 11.0 : 9.0;
  closes[20] = 10.0;
  // Oracle: mean 10, population deviation sqrt(mean((+-1)^2)) = 1, band [8, 12].
  const auto band = bollinger_band(std::span(closes).first(20), 2.0);
  EXPECT_DOUBLE_EQ(band.middle, 10.0);
  EXPECT_DOUBLE_EQ(band.upper, 12.0);
  EXPECT_DOUBLE_EQ(band.lower, 8.0);
  preds[20] = 20.0;
  EXPECT_EQ(bollinger_signals(closes, preds, {})[20], Signal::Buy);
  preds[20] = 1.0;
  EXPECT_EQ(bollinger_signals(closes, preds, {})[20], Signal::Sell);
  preds[20] = 12.0;
  EXPECT_EQ(bollinger_signals(closes, preds, {})[20], Signal::Hold);
}

TEST(Bollinger, RaisingPredictionOnlyMovesSellHoldBuy) {
  std::mt19937_64 rng(8);
  auto rank = [](Signal s) { return s == Signal::Sell ? 0 : s == Signal::Hold ? 1 : 2; };
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_walk(rng, 40);
    auto p = c;
    int prev = -1;
    for (double v = 50; v <= 150; v += 0.25) {
      p[39] = v;
      const int r = rank(bollinger_signals(c, p, {})[39]);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(Shift, Semantics) {
  const std::vector<Signal> in{Signal::Buy, Signal::Sell, Signal::Hold};
  EXPECT_EQ(shift_signals(in), (std::vector<Signal>{Signal::Hold, Signal::Buy, Signal::Sell}));
  EXPECT_EQ(shift_signals(std::vector<Signal>{Signal::Buy}), (std::vector<Signal>{Signal::Hold}));
  const std::vector<Signal> holds(5, Signal::Hold);
  EXPECT_EQ(shift_signals(holds), holds);
}

TEST(Strategies, FutureMutationNeverChangesPastSignals) {
  std::mt19937_64 rng(99);
  for (auto kind : {StrategyKind::MaCrossover, StrategyKind::RateOfChange,
                    StrategyKind::BollingerBands}) {
    StrategyConfig cfg;
    cfg.kind = kind;
    for (int trial = 0; trial < 30; ++trial) {
      auto c = random_walk(rng, 150);
      auto p = random_walk(rng, 150);
      const auto base = generate_signals(c, p, cfg);
      const std::size_t cut = 30 + rng() % 100;
      for (std::size_t d = cut + 1; d < c.size(); ++d) {
        c[d] *= 1.5;
        p[d] *= 0.6;
      }
      const auto mutated = generate_signals(c, p, cfg);
      EXPECT_TRUE(std::equal(base.begin(), base.begin() + long(cut) + 1, mutated.begin()));
    }
  }
}

TEST(StrategyConfig, Validation) {
  StrategyConfig c;
  c.ma_short = 20;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.bb_period = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.bb_width = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.roc_lookback = 0;
  EXPECT_THROW(validate(c), ConfigError);
}
