#pragma once

// Umbrella header for the factored-MDP library.

#include "frl/core.hpp"
#include "frl/planner.hpp"
#include "frl/estimation.hpp"
#include "frl/agents.hpp"
#include "frl/bounds.hpp"
#include "frl/serialization.hpp"
#include "frl/harness.hpp"
#include "frl/config.hpp"
