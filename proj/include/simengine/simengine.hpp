#pragma once

#include "simengine/archive.hpp"
#include "simengine/cluster.hpp"
#include "simengine/config.hpp"
#include "simengine/context.hpp"
#include "simengine/errors.hpp"
#include "simengine/executor.hpp"
#include "simengine/levels.hpp"
#include "simengine/plan.hpp"
#include "simengine/rng.hpp"
#include "simengine/simulation.hpp"
#include "simengine/state.hpp"
#include "simengine/stats.hpp"
#include "simengine/summarize.hpp"
#include "simengine/table.hpp"
#include "simengine/value.hpp"
