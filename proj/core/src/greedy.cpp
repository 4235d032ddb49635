#include "edarp/greedy.hpp"

#include <limits>

namespace edarp {

int greedy_action(const Environment& env, const FleetEpisodeState& s,
                  const FeasibilityMask& mask) {
  const Instance& inst = env.instance();
  int best = -1;
  double best_energy = std::numeric_limits<double>::infinity();
  for (int j = 1; j < inst.node_count(); ++j) {
    if (!mask.allowed[j]) continue;
    const double e = inst.edges.energy(s.vehicle.node, j);
    if (e < best_energy) {
      best_energy = e;
      best = j;
    }
  }
  if (best >= 0) return best;
  if (mask.allowed[0]) return 0;
  throw ContractViolation("greedy: empty feasibility mask");
}

Solution greedy_solve(const Instance& inst, const NoiseConfig& noise) {
  const Environment env(inst);
  NoiseSampler sampler(noise);
  FleetEpisodeState s = env.reset();
  while (!s.terminal) {
    const FeasibilityMask mask = env.feasibility_mask(s);
    env.apply(s, greedy_action(env, s, mask), &sampler);
  }
  return make_solution(inst, s);
}

}  // namespace edarp
