#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edarp/environment.hpp"
#include "edarp/rng.hpp"

namespace edarp {

enum class DestroyOp { Random = 0, Shaw = 1, Worst = 2 };
enum class RepairOp { Random = 0, Regret2 = 1, Regret3 = 2 };
inline constexpr int kDestroyOps = 3;
inline constexpr int kRepairOps = 3;

std::string_view to_string(DestroyOp op);
std::string_view to_string(RepairOp op);

struct AlnsConfig {
  int max_iterations = 10000;
  double time_limit_s = 0.0;  // 0 disables the wall-clock budget
  int segment_length = 100;
  double removal_min = 0.1;
  double removal_max = 0.3;
  double sigma_best = 10.0;
  double sigma_better = 5.0;
  double sigma_accepted = 1.0;
  double weight_decay = 0.2;
  double min_weight = 0.05;
  double rtr_init_fraction = 0.05;
  double rtr_decay = 0.99;
  double shaw_travel_weight = 0.5;
  double shaw_time_weight = 0.5;
  double shaw_exponent = 6.0;
  bool adaptive = true;      // σ credit and weight updates
  bool acceptance = true;    // false: every iteration restarts from the initial solution
  bool record_telemetry = false;
  std::uint64_t seed = 0;
};

// Throws UsageError for out-of-range fields.
void validate(const AlnsConfig& cfg);

template <int N>
struct OperatorWeights {
  std::array<double, N> weight;
  std::array<double, N> score{};
  std::array<int, N> uses{};

  OperatorWeights() { weight.fill(1.0); }
};
using DestroyWeights = OperatorWeights<kDestroyOps>;
using RepairWeights = OperatorWeights<kRepairOps>;

// Segment-end smoothing: w' = max(w_min, (1 - r) w + r score/uses) for used
// operators; unused ones keep their weight. Counters are reset.
template <int N>
void update_weights(OperatorWeights<N>& w, const AlnsConfig& cfg) {
  for (int i = 0; i < N; ++i) {
    if (w.uses[i] > 0) {
      const double avg = w.score[i] / w.uses[i];
      w.weight[i] =
          std::max(cfg.min_weight, (1.0 - cfg.weight_decay) * w.weight[i] + cfg.weight_decay * avg);
    }
    w.score[i] = 0.0;
    w.uses[i] = 0;
  }
}

// Roulette-wheel draw proportional to the weights.
template <int N>
int roulette(const OperatorWeights<N>& w, Rng& rng) {
  double total = 0.0;
  for (double x : w.weight) total += x;
  double u = uniform01(rng) * total;
  for (int i = 0; i < N; ++i) {
    if (u < w.weight[i]) return i;
    u -= w.weight[i];
  }
  return N - 1;
}

inline bool rtr_accept(double candidate, double best, double tolerance) {
  return candidate <= best + tolerance;
}

double rtr_initial_tolerance(double initial_objective, const AlnsConfig& cfg);

// ---- route plans ----

// One node list per vehicle, depots omitted.
using Routes = std::vector<std::vector<int>>;

struct RouteCost {
  bool feasible = false;
  double objective = 0.0;  // J of this vehicle
  int served = 0;
};

struct Plan {
  Routes routes;
  std::vector<RouteCost> costs;
  double objective = 0.0;  // sum of route J
  int served = 0;
  // Acceptance objective J - w_complete * served.
  double score(const CostWeights& w) const { return objective - w.complete * served; }
};

// Route-level evaluation on top of the environment. Vehicles start from the
// same state, so a plan's cost is the sum of independent route costs.
class PlanEvaluator {
 public:
  explicit PlanEvaluator(const Environment& env);

  const Environment& env() const { return *env_; }
  double step_cost(const StepCost& c) const;

  RouteCost evaluate_route(const std::vector<int>& route) const;
  Plan evaluate(const Routes& routes) const;
  // Drops nodes the mask rejects, then closes the route with a legal delivery
  // order. Requests that lose their pickup or delivery are removed entirely.
  RouteCost repair_route(std::vector<int>& route) const;

  Plan from_solution(const Solution& sol) const;

 private:
  const Environment* env_;
};

// ---- destroy ----

struct Destroyed {
  Plan plan;                  // routes after removal and lenient re-decoding
  std::vector<int> removed;   // request ids, in removal order
};

std::vector<int> served_requests(const Plan& plan, const Instance& inst);

Destroyed random_removal(const Plan& plan, int q, Rng& rng, const PlanEvaluator& ev);
Destroyed shaw_removal(const Plan& plan, int q, Rng& rng, const AlnsConfig& cfg,
                       const PlanEvaluator& ev);
Destroyed worst_removal(const Plan& plan, int q, const PlanEvaluator& ev);

double shaw_relatedness(const Instance& inst, int r, int s, const AlnsConfig& cfg);

// Removes the given requests and re-decodes leniently.
Destroyed remove_requests(const Plan& plan, const std::vector<int>& requests,
                          const PlanEvaluator& ev);

// ---- repair ----

struct Insertion {
  int request = -1;
  int route = -1;
  int pickup_pos = -1;    // index in the original route where the pickup goes
  int delivery_pos = -1;  // index in the original route before which the delivery goes
  double delta = 0.0;     // change in route J
};

// Every feasible insertion of `request` into the plan (at most one empty route tried).
std::vector<Insertion> feasible_insertions(const Plan& plan, int request, const PlanEvaluator& ev);
void apply_insertion(Plan& plan, const Insertion& ins, const PlanEvaluator& ev);

Plan random_insert(Plan plan, std::vector<int> pool, Rng& rng, const PlanEvaluator& ev);
Plan regret_insert(Plan plan, std::vector<int> pool, int k, const PlanEvaluator& ev);

// Drops charger visits whose removal keeps the route feasible and lowers its J.
Plan prune_chargers(Plan plan, const PlanEvaluator& ev);

// ---- search ----

struct AlnsIterationLog {
  int iteration = 0;
  double best = 0.0;
  double current = 0.0;
  double candidate = 0.0;
  double tolerance = 0.0;
  int destroy = 0;
  int repair = 0;
  std::array<double, kDestroyOps> destroy_weights{};
  std::array<double, kRepairOps> repair_weights{};
};

struct AlnsResult {
  Solution best;
  Solution initial;
  int iterations = 0;
  std::vector<double> best_history;  // acceptance objective after each iteration
  std::vector<AlnsIterationLog> telemetry;
  DestroyWeights destroy_weights;
  RepairWeights repair_weights;
};

AlnsResult alns_solve(const Instance& inst, const AlnsConfig& cfg);

std::string telemetry_csv(const std::vector<AlnsIterationLog>& log);

}  // namespace edarp
