#pragma once

#include "ephemera/attack.hpp"
#include "ephemera/config.hpp"
#include "ephemera/date.hpp"
#include "ephemera/error.hpp"
#include "ephemera/market_data.hpp"
#include "ephemera/parallel.hpp"
#include "ephemera/pipeline.hpp"
#include "ephemera/predictor.hpp"
#include "ephemera/report.hpp"
#include "ephemera/strategy.hpp"
#include "ephemera/synthetic.hpp"
#include "ephemera/trade_engine.hpp"
