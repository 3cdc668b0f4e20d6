#pragma once

#include "qfcsim/budget.hpp"
#include "qfcsim/config.hpp"
#include "qfcsim/correlation.hpp"
#include "qfcsim/emitter.hpp"
#include "qfcsim/fft.hpp"
#include "qfcsim/fit.hpp"
#include "qfcsim/scenarios.hpp"
#include "qfcsim/signal.hpp"
#include "qfcsim/timetags.hpp"
#include "qfcsim/twm.hpp"
#include "qfcsim/units.hpp"
