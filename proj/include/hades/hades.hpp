#pragma once

#include "hades/acquisition.hpp"
#include "hades/commands.hpp"
#include "hades/config.hpp"
#include "hades/hmc.hpp"
#include "hades/metrics.hpp"
#include "hades/oracles.hpp"
#include "hades/parallel.hpp"
#include "hades/pool.hpp"
#include "hades/rng.hpp"
#include "hades/seq_core.hpp"
#include "hades/surrogate.hpp"
