#include "edarp/oracle.hpp"

#include <limits>

#include "edarp/greedy.hpp"

namespace edarp {

namespace {

class Search {
 public:
  Search(const Instance& inst, std::uint64_t budget) : inst_(inst), env_(inst), budget_(budget) {}

  void run() {
    FleetEpisodeState root = env_.reset(false);
    std::vector<int> path;
    dfs(root, path);
  }

  std::vector<int> best_actions;
  double best_reward = -std::numeric_limits<double>::infinity();
  std::uint64_t nodes = 0;
  bool exhausted = false;

 private:
  double reward(const FleetEpisodeState& s) const {
    return -objective_value(inst_.weights, s.totals) + inst_.weights.complete * s.served;
  }

  void dfs(const FleetEpisodeState& s, std::vector<int>& path) {
    if (exhausted) return;
    if (++nodes > budget_) {
      exhausted = true;
      return;
    }
    if (s.terminal) {
      const double r = reward(s);
      if (r > best_reward) {
        best_reward = r;
        best_actions = path;
      }
      return;
    }
    // Costs only grow, so the best completion serves everything for free.
    const double bound =
        -objective_value(inst_.weights, s.totals) + inst_.weights.complete * inst_.request_count();
    if (bound <= best_reward) return;

    const int count = inst_.node_count();
    for (int a = 0; a < count; ++a) {
      if (!env_.allowed(s, a)) continue;
      FleetEpisodeState next = s;
      env_.apply(next, a);
      path.push_back(a);
      dfs(next, path);
      path.pop_back();
      if (exhausted) return;
    }
  }

  const Instance& inst_;
  Environment env_;
  std::uint64_t budget_;
};

}  // namespace

ExactResult exact_solve(const Instance& inst, std::uint64_t budget) {
  Search search(inst, budget);
  search.run();
  ExactResult out;
  out.nodes = search.nodes;
  out.optimal = !search.exhausted;
  if (search.best_reward > -std::numeric_limits<double>::infinity()) {
    out.solution = replay_actions(inst, search.best_actions);
  } else {
    out.solution = greedy_solve(inst);
  }
  return out;
}

}  // namespace edarp
