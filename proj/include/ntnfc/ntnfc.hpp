#pragma once

#include "ntnfc/checkpoint.hpp"
#include "ntnfc/config.hpp"
#include "ntnfc/decision.hpp"
#include "ntnfc/error.hpp"
#include "ntnfc/forecast.hpp"
#include "ntnfc/formats.hpp"
#include "ntnfc/lstm_forecaster.hpp"
#include "ntnfc/metrics.hpp"
#include "ntnfc/nn.hpp"
#include "ntnfc/normal.hpp"
#include "ntnfc/rng.hpp"
#include "ntnfc/sff.hpp"
#include "ntnfc/sim.hpp"
#include "ntnfc/text_io.hpp"
#include "ntnfc/timeseries.hpp"
#include "ntnfc/verify.hpp"
