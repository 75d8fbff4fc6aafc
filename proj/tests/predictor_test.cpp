#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ephemera/predictor.hpp"
#include "ephemera/synthetic.hpp"

using namespace ephemera;

namespace {

StockSeries from_closes(const std::vector<double>& closes, const std::string& ticker = "T") {
  const auto cal = synthetic::business_days(Date(2019, 1, 2), closes.size());
  StockSeries s{ticker, {}};
  for (std::size_t i = 0; i < closes.size(); ++i)
    s.bars.push_back({cal[i], closes[i], closes[i] * 1.01, closes[i] * 0.99, closes[i],
                      1000.0 + double(i % 7)});
  return s;
}

PredictorConfig close_only(std::size_t w, double lambda) {
  PredictorConfig c;
  c.window = w;
  c.features = {Feature::Close};
  c.ridge_lambda = lambda;
  return c;
}

}  // namespace

TEST(FitBaseline, ConstantSeriesPredictsConstant) {
  const double c = 37.25;
  const auto s = from_closes(std::vector<double>(120, c));
  for (std::size_t w : {1u, 3u, 10u, 50u}) {
    for (bool all : {false, true}) {
      PredictorConfig cfg = close_only(w, 1e-3);
      if (all) cfg.features.assign(kAllFeatures.begin(), kAllFeatures.end());
      const auto p = LinearPredictor::fit(s, cfg);
      for (std::size_t t = w - 1; t < s.size(); t += 7)
        EXPECT_NEAR(p.predict_next(s, t), c, 1e-9) << "w=" << w;
    }
  }
}

TEST(FitBaseline, LinearTrendExtrapolatesExactly) {
  // close_t = 2t with w=2: in raw units the least-squares system is
  //   2(t+1) = a * 2(t-1) + b * 2t  for all t  =>  a = -1, b = 2.
  // Min-max scaling (offset m, scale r) is shared by inputs and target, so the
  // same coefficients hold in scaled space.
  std::vector<double> train(30), full(60);
  for (std::size_t t = 0; t < full.size(); ++t) full[t] = 2.0 * double(t + 1);
  std::copy_n(full.begin(), train.size(), train.begin());
  const auto p = LinearPredictor::fit(from_closes(train), close_only(2, 0.0));
  ASSERT_EQ(p.coefficients().size(), 2);
  EXPECT_NEAR(p.coefficients()(0), -1.0, 1e-9);
  EXPECT_NEAR(p.coefficients()(1), 2.0, 1e-9);
  const auto s = from_closes(full);
  for (std::size_t t = 1; t + 1 < full.size(); ++t)
    EXPECT_NEAR(p.predict_next(s, t), full[t + 1], 1e-6) << "t=" << t;
}

TEST(FitBaseline, SingularWithoutRidgeIsFitError) {
  const auto s = from_closes(std::vector<double>(40, 5.0));
  try {
    LinearPredictor::fit(s, close_only(3, 0.0));
    FAIL();
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("ridge_lambda"), std::string::npos);
  }
}

TEST(FitBaseline, NeedsWindowPlusOneDays) {
  const auto s = from_closes({1, 2, 3});
  EXPECT_THROW(LinearPredictor::fit(s, close_only(3, 1e-3)), FitError);
  EXPECT_NO_THROW(LinearPredictor::fit(from_closes({1, 2, 3, 4}), close_only(3, 1e-3)));
}

TEST(FitBaseline, BeatsLastValueOnMomentumRandomWalk) {
  // Random walk whose daily log-returns follow AR(1); the last-value forecast
  // ignores the autocorrelation the linear model can pick up.
  const auto cal = synthetic::business_days(Date(2000, 1, 3), 5000);
  synthetic::SeriesParams params;
  params.momentum = 0.5;
  params.volatility = 0.01;
  params.drift = 0.0;
  const auto s = synthetic::generate("RW", cal, params, 2024);
  const std::size_t n_train = 4000;
  const StockSeries train{"RW", {s.bars.begin(), s.bars.begin() + n_train}};
  const auto p = LinearPredictor::fit(train, PredictorConfig{});
  const auto pred = forecast(p, s, n_train, s.size() - n_train);
  PredictionSeries keyed{"RW", std::vector<std::optional<double>>(n_train)};
  keyed.values.insert(keyed.values.end(), pred.values.begin(), pred.values.end());
  const double rmse = evaluate_rmse(keyed, s, n_train, s.size());

  double naive = 0;  // oracle: yesterday's close
  for (std::size_t t = n_train; t < s.size(); ++t) {
    const double e = s.bars[t - 1].close - s.bars[t].close;
    naive += e * e;
  }
  naive = std::sqrt(naive / double(s.size() - n_train));
  EXPECT_TRUE(std::isfinite(rmse));
  EXPECT_LT(rmse, naive);
}

TEST(FitBaseline, DeterministicBitForBit) {
  auto d = synthetic::portfolio({"A", "B"}, 300, 11);
  const auto a = fit_baseline(d, PredictorConfig{});
  const auto b = fit_baseline(d, PredictorConfig{});
  for (const auto& [ticker, p] : a) {
    const auto& q = b.at(ticker);
    ASSERT_EQ(p.coefficients().size(), q.coefficients().size());
    for (Eigen::Index i = 0; i < p.coefficients().size(); ++i)
      ASSERT_EQ(p.coefficients()(i), q.coefficients()(i));
  }
}

TEST(FitBaseline, NormalizationComesFromTrainOnly) {
  auto d = synthetic::portfolio({"A"}, 300, 5);
  const auto& full = d.series[0];
  const StockSeries train{"A", {full.bars.begin(), full.bars.begin() + 200}};
  StockSeries shifted = full;
  for (std::size_t t = 200; t < shifted.size(); ++t) {
    auto& b = shifted.bars[t];
    b.open *= 3;
    b.high *= 3;
    b.low *= 3;
    b.close *= 3;
    b.volume *= 10;
  }
  const auto p = LinearPredictor::fit(train, PredictorConfig{});
  const StockSeries train_again{"A", {shifted.bars.begin(), shifted.bars.begin() + 200}};
  const auto q = LinearPredictor::fit(train_again, PredictorConfig{});
  for (std::size_t j = 0; j < p.scales().size(); ++j) {
    EXPECT_EQ(p.scales()[j].offset, q.scales()[j].offset);
    EXPECT_EQ(p.scales()[j].scale, q.scales()[j].scale);
  }
  double lo = full.bars[0].close, hi = lo;
  for (const auto& b : train.bars) {
    lo = std::min(lo, b.close);
    hi = std::max(hi, b.close);
  }
  EXPECT_EQ(p.target_scale().offset, lo);
  EXPECT_EQ(p.target_scale().scale, hi - lo);
}

TEST(PredictNext, DependsOnlyOnTheWindow) {
  auto d = synthetic::portfolio({"A"}, 260, 9);
  auto s = d.series[0];
  const auto p = LinearPredictor::fit(StockSeries{"A", {s.bars.begin(), s.bars.begin() + 150}},
                                      PredictorConfig{});
  std::vector<double> before;
  for (std::size_t t = 49; t < 200; ++t) before.push_back(p.predict_next(s, t));
  for (std::size_t t = 200; t < s.size(); ++t) s.bars[t].close *= 1.7;
  for (std::size_t t = 49; t < 200; ++t) EXPECT_EQ(p.predict_next(s, t), before[t - 49]);

  // Identical windows at different days give identical outputs.
  StockSeries rep{"A", {}};
  for (int k = 0; k < 2; ++k)
    for (std::size_t t = 0; t < 60; ++t) rep.bars.push_back(s.bars[t]);
  EXPECT_EQ(p.predict_next(rep, 55), p.predict_next(rep, 115));
  EXPECT_THROW(p.predict_next(rep, 10), WindowError);
}

TEST(PredictNext, LongerTrainPrefixKeepsEarlierPredictionsWithFixedModel) {
  auto d = synthetic::portfolio({"A"}, 300, 21);
  const auto& s = d.series[0];
  const auto p = LinearPredictor::fit(StockSeries{"A", {s.bars.begin(), s.bars.begin() + 120}},
                                      PredictorConfig{});
  const StockSeries prefix{"A", {s.bars.begin(), s.bars.begin() + 200}};
  for (std::size_t t = 60; t < 200; ++t) EXPECT_EQ(p.predict_next(prefix, t), p.predict_next(s, t));
}

TEST(ImportPredictions, MatchesCalendar) {
  const auto cal = synthetic::business_days(Date(2022, 3, 1), 4);
  std::ostringstream text;
  text << "Date,Prediction\n";
  for (std::size_t i = 0; i < cal.size(); ++i) text << cal[i].str() << ',' << 100 + i << '\n';
  std::istringstream in(text.str());
  const auto p = parse_predictions(in, cal, "G");
  ASSERT_EQ(p.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(p.at(i), 100.0 + double(i));
}

TEST(ImportPredictions, UnknownAndDuplicateDates) {
  const auto cal = synthetic::business_days(Date(2022, 3, 1), 3);
  {
    std::istringstream in("Date,Prediction\n2022-03-01,1\n2022-03-05,2\n");
    try {
      parse_predictions(in, cal, "G");
      FAIL();
    } catch (const ImportError& e) {
      EXPECT_NE(std::string(e.what()).find("2022-03-05"), std::string::npos);
    }
  }
  {
    std::istringstream in("Date,Prediction\n2022-03-01,1\n2022-03-01,2\n");
    EXPECT_THROW(parse_predictions(in, cal, "G"), ImportError);
  }
}

TEST(ImportPredictions, RoundTripsThroughWriter) {
  const auto cal = synthetic::business_days(Date(2022, 3, 1), 5);
  PredictionSeries p{"G", {1.25, std::nullopt, 3.0 / 7.0, 4.0, 5.5}};
  std::ostringstream out;
  write_predictions(out, p, cal);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_predictions(in, cal, "G"), p);
}

TEST(EvaluateRmse, ZeroAndConstantOffset) {
  const auto s = from_closes({10, 11, 12, 13});
  PredictionSeries same{"T", {10.0, 11.0, 12.0, 13.0}};
  PredictionSeries plus{"T", {11.0, 12.0, 13.0, 14.0}};
  EXPECT_EQ(evaluate_rmse(same, s, 0, 4), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_rmse(plus, s, 0, 4), 1.0);
  EXPECT_THROW(evaluate_rmse(same, s, 2, 2), EvaluationError);
  PredictionSeries gap{"T", {10.0, std::nullopt, 12.0, 13.0}};
  EXPECT_THROW(evaluate_rmse(gap, s, 0, 4), EvaluationError);
}

TEST(PredictorConfig, Validation) {
  PredictorConfig c;
  c.features.clear();
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.ridge_lambda = -1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.window = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.features = {Feature::Close, Feature::Close};
  EXPECT_THROW(validate(c), ConfigError);
}
