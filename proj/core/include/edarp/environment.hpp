#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "edarp/error.hpp"
#include "edarp/instance.hpp"
#include "edarp/rng.hpp"

namespace edarp {

// ---- charging and unit conversion ----

// Piecewise charging power in kW for a state of charge in [0, 1]:
// 100 kW below 0.45, linear taper 100 - 140 (soc - 0.45) up to 0.95, 30 kW above.
double charging_power_kw(double soc);

// Energy (kWh) as a fraction of battery capacity.
inline double kwh_to_soc(double kwh, double battery_kwh) { return kwh / battery_kwh; }

// SoC gained by charging at `power_kw` for `seconds` on a `battery_kwh` pack.
inline double charge_soc_gain(double power_kw, double seconds, double battery_kwh) {
  return power_kw * seconds / 3600.0 / battery_kwh;
}

// ---- stochastic edge realization ----

struct NoiseConfig {
  bool enabled = false;
  double scale = 0.1;
  std::uint64_t seed = 0;
};

// base * (1 + |z| * scale); never below base for base >= 0.
double sample_noise(double base, double scale, double z);

// Draws one |z| per traversed edge; the same draw inflates time and energy.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseConfig& cfg);
  bool enabled() const { return cfg_.enabled && cfg_.scale > 0.0; }
  double scale() const { return cfg_.scale; }
  double draw_z() { return standard_normal(rng_); }

 private:
  NoiseConfig cfg_;
  Rng rng_;
};

// ---- episode state ----

struct RouteStop {
  int node = 0;
  double arrival = 0.0;
  double service_start = 0.0;
  double soc = 1.0;           // after service (and charging)
  double charge_delta = 0.0;  // SoC gained at this stop
  int load = 0;               // onboard passengers when departing

  bool operator==(const RouteStop&) const = default;
};

struct OnboardPassenger {
  int request = 0;
  double pickup_start = 0.0;

  bool operator==(const OnboardPassenger&) const = default;
};

struct VehicleState {
  int node = 0;
  double clock = 0.0;
  double soc = 1.0;
  int load = 0;
  std::vector<OnboardPassenger> onboard;

  bool carries(int request) const;
  double pickup_start(int request) const;

  bool operator==(const VehicleState&) const = default;
};

struct CostAccumulators {
  double energy_kwh = 0.0;
  double wait_s = 0.0;
  double late_s = 0.0;
  double travel_s = 0.0;
  int charge_visits = 0;
  int fallback_steps = 0;

  bool operator==(const CostAccumulators&) const = default;
};

struct FleetEpisodeState {
  VehicleState vehicle;
  int vehicles_used = 1;
  std::vector<std::uint8_t> visited;            // per node; the depot is never marked
  std::vector<std::uint8_t> served_pickups;     // per request
  std::vector<std::uint8_t> served_deliveries;  // per request
  int served = 0;                               // completed deliveries
  std::vector<std::vector<RouteStop>> routes;   // one per vehicle started, begins at the depot
  bool record_routes = true;
  CostAccumulators totals;
  bool terminal = false;
  int steps = 0;

  bool operator==(const FleetEpisodeState&) const = default;
};

struct FeasibilityMask {
  std::vector<std::uint8_t> allowed;
  bool fallback = false;  // only under noise: the regular rules left no action

  int count() const;
  bool any() const { return count() > 0; }
  // 0 for allowed, -inf for blocked; the decoder's additive mask.
  std::vector<double> additive() const;
};

struct StepCost {
  double energy_kwh = 0.0;
  double wait_s = 0.0;
  double late_s = 0.0;
  double travel_s = 0.0;
};

struct StepInfo {
  StepCost incurred;
  double charge_delta = 0.0;
  bool vehicle_reset = false;
  bool terminal = false;
};

struct StepOutcome {
  FleetEpisodeState next;
  StepInfo info;
};

// ---- solutions ----

struct CostBreakdown {
  double energy_kwh = 0.0;
  double wait_s = 0.0;
  double late_s = 0.0;
  double travel_s = 0.0;
  double objective = 0.0;  // J
  double reward = 0.0;     // R = -J + w_complete * served
};

struct SolutionMetrics {
  double completion_rate = 0.0;  // fraction in [0, 1]
  int vehicles_used = 0;         // routes with at least one non-depot stop
  double load_factor = 0.0;      // mean load over route segments with load >= 1
  int charge_visits = 0;
  double energy_per_vehicle_kwh = 0.0;
  double wait_per_request_s = 0.0;
  double late_per_request_s = 0.0;
  int fallback_steps = 0;
};

struct Solution {
  std::vector<std::vector<RouteStop>> routes;
  int served = 0;
  int requests = 0;
  CostBreakdown cost;
  SolutionMetrics metrics;

  // Node sequence fed to step() to reproduce the routes (initial depot omitted).
  std::vector<int> actions() const;
};

double objective_value(const CostWeights& w, const CostAccumulators& totals);
double objective_value(const CostWeights& w, double energy_kwh, double wait_s, double late_s,
                       double travel_s);

// ---- the MDP ----

// Transition and masking logic for one instance. Holds a reference to the
// instance, which must outlive it. Stateless otherwise, so one Environment
// can serve any number of concurrent episodes.
class Environment {
 public:
  explicit Environment(const Instance& inst);

  const Instance& instance() const { return *inst_; }
  int node_count() const { return inst_->node_count(); }

  FleetEpisodeState reset(bool record_routes = true) const;

  FeasibilityMask feasibility_mask(const FleetEpisodeState& s) const;
  // Regular mask rules for a single candidate (no noise fallback).
  bool allowed(const FleetEpisodeState& s, int node) const;

  // Applies `action` in place. Throws ContractViolation for an action outside
  // the mask or a step after termination.
  StepInfo apply(FleetEpisodeState& s, int action, NoiseSampler* noise = nullptr) const;
  StepOutcome step(const FleetEpisodeState& s, int action, NoiseSampler* noise = nullptr) const;

  // Minimum energy from `node` to the depot or any charger (r_j of the battery rule).
  double safe_return_energy(int node) const { return safe_return_kwh_[node]; }

  // Rules 2-5 for the vehicle alone (capacity, windows/ride time, battery, operational).
  bool vehicle_rules(const VehicleState& v, int node) const;
  // Everything in the mask except the episode-wide visited set: onboard check
  // for deliveries, rules 2-5, and the completion guard.
  bool vehicle_allows(const VehicleState& v, int node) const;
  // Deterministic move without any checks; used by solvers that plan routes.
  StepCost move(VehicleState& v, int node) const;
  // A delivery order (then the depot) that empties the vehicle legally.
  bool completion_order(const VehicleState& v, std::vector<int>& order) const;

 private:
  struct Travel {
    double time;
    double energy;
  };
  // Deterministic or realized move of the vehicle to `node`.
  StepCost advance(VehicleState& v, int node, Travel travel, double* charge_delta) const;
  bool completion_exists(const VehicleState& v, std::vector<int>* order) const;
  bool lookahead_ok(const VehicleState& v, int node) const;

  const Instance* inst_;
  std::vector<double> safe_return_kwh_;
};

// Builds a Solution from a terminal (or abandoned) episode state.
Solution make_solution(const Instance& inst, const FleetEpisodeState& s);

// Replays an action sequence deterministically. Throws ReplayError on a mask
// violation, naming the offending step.
class ReplayError : public DataError {
 public:
  ReplayError(int step, int node, const std::string& what)
      : DataError(what), step_(step), node_(node) {}
  int step() const { return step_; }
  int node() const { return node_; }

 private:
  int step_;
  int node_;
};

Solution replay_actions(const Instance& inst, const std::vector<int>& actions);

// Routes given as node lists without depots; empty vehicles are implied.
Solution replay_routes(const Instance& inst, const std::vector<std::vector<int>>& routes);

struct ScoreResult {
  double objective = 0.0;
  double reward = 0.0;
  SolutionMetrics metrics;
};

ScoreResult score_solution(const Solution& sol, const Instance& inst);

}  // namespace edarp
