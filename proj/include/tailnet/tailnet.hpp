#pragma once

#include "tailnet/conditional_limits.hpp"
#include "tailnet/config.hpp"
#include "tailnet/count_dist.hpp"
#include "tailnet/csv.hpp"
#include "tailnet/error.hpp"
#include "tailnet/expectation.hpp"
#include "tailnet/market.hpp"
#include "tailnet/montecarlo.hpp"
#include "tailnet/norm.hpp"
#include "tailnet/parallel.hpp"
#include "tailnet/poisson_approx.hpp"
#include "tailnet/risk_constants.hpp"
#include "tailnet/rng.hpp"
#include "tailnet/uncovered.hpp"
