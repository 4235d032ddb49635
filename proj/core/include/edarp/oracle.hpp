#pragma once

#include <cstdint>

#include "edarp/environment.hpp"

namespace edarp {

inline constexpr std::uint64_t kDefaultOracleBudget = 10'000'000;

struct ExactResult {
  Solution solution;
  bool optimal = false;         // false when the node budget ran out
  std::uint64_t nodes = 0;      // search nodes expanded
};

// Depth-first branch and bound over mask-feasible action sequences. Ties in
// reward go to the lexicographically smallest action sequence.
ExactResult exact_solve(const Instance& inst, std::uint64_t budget = kDefaultOracleBudget);

}  // namespace edarp
