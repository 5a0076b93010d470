#pragma once

// Two-player price-impact tracking game: closed-form open-loop Nash
// equilibrium, independent ODE cross-check, and the full optimality
// verification toolkit.

#include "duotrack/coefficients.hpp"
#include "duotrack/equilibrium.hpp"
#include "duotrack/grid.hpp"
#include "duotrack/io.hpp"
#include "duotrack/model.hpp"
#include "duotrack/montecarlo.hpp"
#include "duotrack/quadrature.hpp"
#include "duotrack/random.hpp"
#include "duotrack/scenarios.hpp"
#include "duotrack/signals.hpp"
#include "duotrack/targets.hpp"
#include "duotrack/verification.hpp"
#include "duotrack/verify.hpp"
