#pragma once

#include "watter/baselines.hpp"
#include "watter/core.hpp"
#include "watter/domain.hpp"
#include "watter/poolgraph.hpp"
#include "watter/routing.hpp"
#include "watter/simharness.hpp"
#include "watter/spatial.hpp"
#include "watter/strategy.hpp"
#include "watter/thresholdopt.hpp"
#include "watter/training.hpp"
#include "watter/valuelearn.hpp"
