#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ephemera/attack.hpp"
#include "ephemera/error.hpp"
#include "ephemera/market_data.hpp"
#include "ephemera/predictor.hpp"
#include "ephemera/strategy.hpp"
#include "ephemera/trade_engine.hpp"
#include "json.hpp"

namespace ephemera {

inline constexpr std::string_view kConfigSchema = "ephemera.config/1";

/// A day given either as a test-window index or as a calendar date.
using DayRef = std::variant<std::size_t, Date>;

struct AttackConfig {
  std::string ticker;
  EpMode mode = EpMode::StdDev;
  std::vector<std::size_t> omegas{30, 40, 50};
  double drop_fraction = 0.10;
  double value = 0;
  Deviation deviation = Deviation::Sample;
  /// nullopt means every test day.
  std::optional<std::vector<DayRef>> days;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct RunConfig {
  std::string data_dir = "data";
  std::vector<std::string> tickers;
  SplitSpec split;
  PredictorConfig predictor;
  /// When set, forecasts are read from `<dir>/<ticker>.csv` instead of fitted.
  std::optional<std::string> predictions_dir;
  StrategyConfig strategy;
  CostModel costs;
  std::optional<AttackConfig> attack;
  std::string output_dir = "out";
  std::size_t workers = 1;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

using json = nlohmann::json;

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) unseen_.insert(it.key());
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void read(const char* key, T& out) {
    if (!j_.contains(key)) return;
    unseen_.erase(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(std::string("field '") + key + "' has the wrong type");
    }
  }

  const json& raw(const char* key) {
    unseen_.erase(key);
    return j_.at(key);
  }

  void finish() const {
    if (!unseen_.empty()) fail("unknown key '" + *unseen_.begin() + "'");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config", where_ + ": " + what);
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> unseen_;
};

template <typename Enum, typename Parse>
Enum read_enum(ObjectReader& r, const char* key, Enum current, Parse parse) {
  std::string text;
  if (!r.has(key)) return current;
  r.read(key, text);
  auto v = parse(text);
  if (!v) r.fail(std::string("invalid value '") + text + "' for '" + key + "'");
  return *v;
}

inline std::optional<Deviation> parse_deviation(std::string_view s) {
  if (s == "sample") return Deviation::Sample;
  if (s == "population") return Deviation::Population;
  return std::nullopt;
}

inline std::string_view to_string(Deviation d) {
  return d == Deviation::Sample ? "sample" : "population";
}

}  // namespace detail

inline AttackConfig attack_config_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "attack");
  AttackConfig a;
  r.read("ticker", a.ticker);
  a.mode = detail::read_enum(r, "mode", a.mode, parse_ep_mode);
  r.read("omegas", a.omegas);
  r.read("drop_fraction", a.drop_fraction);
  r.read("value", a.value);
  a.deviation = detail::read_enum(r, "deviation", a.deviation, detail::parse_deviation);
  if (r.has("days")) {
    const auto& d = r.raw("days");
    if (d.is_string()) {
      if (d.get<std::string>() != "all") r.fail("days must be \"all\" or a list");
    } else if (d.is_array()) {
      std::vector<DayRef> days;
      for (const auto& e : d) {
        if (e.is_number_unsigned()) {
          days.emplace_back(e.get<std::size_t>());
        } else if (e.is_string()) {
          auto date = Date::parse(e.get<std::string>());
          if (!date) r.fail("invalid day '" + e.get<std::string>() + "'");
          days.emplace_back(*date);
        } else {
          r.fail("days entries must be test-day indices or YYYY-MM-DD dates");
        }
      }
      a.days = std::move(days);
    } else {
      r.fail("days must be \"all\" or a list");
    }
  }
  r.finish();
  if (a.ticker.empty()) r.fail("ticker is required");
  if (a.mode == EpMode::StdDev) {
    if (a.omegas.empty()) r.fail("omegas must not be empty");
    for (auto w : a.omegas)
      if (w < 2) r.fail("omega values must be >= 2");
  }
  if (a.mode == EpMode::Overestimate && !(a.drop_fraction > 0 && a.drop_fraction < 1))
    r.fail("drop_fraction must lie in (0, 1)");
  return a;
}

inline nlohmann::ordered_json to_json(const AttackConfig& a) {
  nlohmann::ordered_json j{{"ticker", a.ticker},
                           {"mode", to_string(a.mode)},
                           {"omegas", a.omegas},
                           {"drop_fraction", a.drop_fraction},
                           {"value", a.value},
                           {"deviation", detail::to_string(a.deviation)}};
  if (!a.days) {
    j["days"] = "all";
  } else {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& d : *a.days) {
      if (auto* i = std::get_if<std::size_t>(&d)) arr.push_back(*i);
      else arr.push_back(std::get<Date>(d).str());
    }
    j["days"] = arr;
  }
  return j;
}

/// Parses a run configuration. Unknown keys anywhere are rejected. Relative
/// paths are resolved against `base_dir` when it is non-empty; an `attack`
/// value may be the path of a separate attack file.
inline RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  detail::ObjectReader r(j, "config");
  RunConfig c;
  if (r.has("schema")) {
    std::string schema;
    r.read("schema", schema);
    if (schema != kConfigSchema) r.fail("unsupported schema '" + schema + "'");
  }
  r.read("data_dir", c.data_dir);
  r.read("tickers", c.tickers);
  r.read("output_dir", c.output_dir);
  r.read("workers", c.workers);

  if (r.has("split")) {
    detail::ObjectReader s(r.raw("split"), "split");
    s.read("train_fraction", c.split.train_fraction);
    s.read("window", c.split.window);
    s.finish();
  }
  if (r.has("predictor")) {
    detail::ObjectReader p(r.raw("predictor"), "predictor");
    p.read("window", c.predictor.window);
    if (p.has("features")) {
      std::vector<std::string> names;
      p.read("features", names);
      c.predictor.features.clear();
      for (const auto& n : names) {
        auto f = parse_feature(n);
        if (!f) p.fail("unknown feature '" + n + "'");
        c.predictor.features.push_back(*f);
      }
    }
    p.read("ridge_lambda", c.predictor.ridge_lambda);
    if (p.has("predictions_dir")) {
      std::string dir;
      p.read("predictions_dir", dir);
      c.predictions_dir = dir;
    }
    p.finish();
  }
  if (r.has("strategy")) {
    detail::ObjectReader s(r.raw("strategy"), "strategy");
    auto& st = c.strategy;
    st.kind = detail::read_enum(s, "kind", st.kind, parse_strategy_kind);
    s.read("ma_short", st.ma_short);
    s.read("ma_long", st.ma_long);
    s.read("roc_lookback", st.roc_lookback);
    s.read("roc_buy_threshold", st.roc_buy_threshold);
    s.read("roc_sell_threshold", st.roc_sell_threshold);
    st.roc_source = detail::read_enum(s, "roc_source", st.roc_source,
                                      [](std::string_view v) -> std::optional<RocSource> {
                                        if (v == "prediction") return RocSource::Prediction;
                                        if (v == "close") return RocSource::Close;
                                        return std::nullopt;
                                      });
    s.read("bb_period", st.bb_period);
    s.read("bb_width", st.bb_width);
    s.finish();
  }
  if (r.has("costs")) {
    detail::ObjectReader s(r.raw("costs"), "costs");
    auto& k = c.costs;
    s.read("commission_per_share", k.commission_per_share);
    s.read("slippage_per_share", k.slippage_per_share);
    k.slippage_mode = detail::read_enum(s, "slippage_mode", k.slippage_mode,
                                        [](std::string_view v) -> std::optional<SlippageMode> {
                                          if (v == "per_share") return SlippageMode::PerShare;
                                          if (v == "proportional") return SlippageMode::Proportional;
                                          return std::nullopt;
                                        });
    s.read("position_fraction", k.position_fraction);
    s.read("initial_capital", k.initial_capital);
    s.read("risk_free_annual", k.risk_free_annual);
    s.read("trading_days_per_year", k.trading_days_per_year);
    s.finish();
  }
  if (r.has("attack")) {
    const auto& a = r.raw("attack");
    if (a.is_null()) {
    } else if (a.is_string()) {
      std::filesystem::path p = a.get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      std::ifstream in(p);
      if (!in) r.fail("cannot open attack file '" + p.string() + "'");
      nlohmann::json aj;
      try {
        aj = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        r.fail("attack file '" + p.string() + "' is not valid JSON: " + e.what());
      }
      c.attack = attack_config_from_json(aj);
    } else {
      c.attack = attack_config_from_json(a);
    }
  }
  r.finish();

  if (c.tickers.empty()) r.fail("tickers must not be empty");
  if (c.workers < 1) r.fail("workers must be >= 1");
  validate(c.split);
  validate(c.predictor);
  validate(c.strategy);
  validate(c.costs);
  if (c.predictor.window != c.split.window)
    r.fail("predictor.window must equal split.window");

  auto resolve = [&](std::string& path) {
    std::filesystem::path p = path;
    if (p.is_relative() && !base_dir.empty()) path = (base_dir / p).lexically_normal().string();
  };
  if (!base_dir.empty()) {
    resolve(c.data_dir);
    resolve(c.output_dir);
    if (c.predictions_dir) resolve(*c.predictions_dir);
  }
  return c;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  std::vector<std::string> features;
  for (auto f : c.predictor.features) features.emplace_back(to_string(f));
  nlohmann::ordered_json predictor{{"window", c.predictor.window},
                                   {"features", features},
                                   {"ridge_lambda", c.predictor.ridge_lambda}};
  if (c.predictions_dir) predictor["predictions_dir"] = *c.predictions_dir;
  const auto& st = c.strategy;
  const auto& k = c.costs;
  nlohmann::ordered_json j{
      {"schema", kConfigSchema},
      {"data_dir", c.data_dir},
      {"tickers", c.tickers},
      {"split", {{"train_fraction", c.split.train_fraction}, {"window", c.split.window}}},
      {"predictor", predictor},
      {"strategy",
       {{"kind", to_string(st.kind)},
        {"ma_short", st.ma_short},
        {"ma_long", st.ma_long},
        {"roc_lookback", st.roc_lookback},
        {"roc_buy_threshold", st.roc_buy_threshold},
        {"roc_sell_threshold", st.roc_sell_threshold},
        {"roc_source", to_string(st.roc_source)},
        {"bb_period", st.bb_period},
        {"bb_width", st.bb_width}}},
      {"costs",
       {{"commission_per_share", k.commission_per_share},
        {"slippage_per_share", k.slippage_per_share},
        {"slippage_mode", to_string(k.slippage_mode)},
        {"position_fraction", k.position_fraction},
        {"initial_capital", k.initial_capital},
        {"risk_free_annual", k.risk_free_annual},
        {"trading_days_per_year", k.trading_days_per_year}}},
      {"output_dir", c.output_dir},
      {"workers", c.workers}};
  if (c.attack) j["attack"] = to_json(*c.attack);
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace ephemera
