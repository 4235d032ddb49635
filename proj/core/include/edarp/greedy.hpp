#pragma once

#include "edarp/environment.hpp"

namespace edarp {

// Nearest feasible neighbour by energy: at each step the allowed non-depot
// node with the smallest energy from the current node (lowest index on ties),
// else the depot.
int greedy_action(const Environment& env, const FleetEpisodeState& s, const FeasibilityMask& mask);

Solution greedy_solve(const Instance& inst, const NoiseConfig& noise = {});

}  // namespace edarp
