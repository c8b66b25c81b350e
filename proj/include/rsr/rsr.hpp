#pragma once

// Umbrella header: the whole library in one include.

#include "rsr/common.hpp"
#include "rsr/config.hpp"
#include "rsr/distribution.hpp"
#include "rsr/dp.hpp"
#include "rsr/grid.hpp"
#include "rsr/kernel.hpp"
#include "rsr/models.hpp"
#include "rsr/monte_carlo.hpp"
#include "rsr/pipeline.hpp"
#include "rsr/risk.hpp"
#include "rsr/sets.hpp"
#include "rsr/tiny_mdp.hpp"
