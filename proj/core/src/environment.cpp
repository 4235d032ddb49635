#include "edarp/environment.hpp"

#include <algorithm>
#include <cmath>

namespace edarp {

double charging_power_kw(double soc) {
  if (!(soc >= 0.0 && soc <= 1.0))
    throw UsageError("charging_power_kw: state of charge " + std::to_string(soc) +
                     " outside [0, 1]");
  if (soc < 0.45) return 100.0;
  if (soc <= 0.95) return 100.0 - 140.0 * (soc - 0.45);
  return 30.0;
}

double sample_noise(double base, double scale, double z) {
  return base * (1.0 + std::abs(z) * scale);
}

NoiseSampler::NoiseSampler(const NoiseConfig& cfg)
    : cfg_(cfg), rng_(make_rng(cfg.seed, "environment.noise")) {}

bool VehicleState::carries(int request) const {
  return std::any_of(onboard.begin(), onboard.end(),
                     [request](const OnboardPassenger& p) { return p.request == request; });
}

double VehicleState::pickup_start(int request) const {
  for (const auto& p : onboard)
    if (p.request == request) return p.pickup_start;
  return std::numeric_limits<double>::quiet_NaN();
}

int FeasibilityMask::count() const {
  return static_cast<int>(std::count(allowed.begin(), allowed.end(), std::uint8_t{1}));
}

std::vector<double> FeasibilityMask::additive() const {
  std::vector<double> out(allowed.size());
  for (std::size_t i = 0; i < allowed.size(); ++i)
    out[i] = allowed[i] ? 0.0 : -std::numeric_limits<double>::infinity();
  return out;
}

double objective_value(const CostWeights& w, double energy_kwh, double wait_s, double late_s,
                       double travel_s) {
  return w.energy * energy_kwh +
         (w.wait * wait_s + w.late * late_s + w.travel * travel_s) / w.time_unit_s;
}

double objective_value(const CostWeights& w, const CostAccumulators& t) {
  return objective_value(w, t.energy_kwh, t.wait_s, t.late_s, t.travel_s);
}

std::vector<int> Solution::actions() const {
  std::vector<int> out;
  for (const auto& route : routes)
    for (std::size_t k = 1; k < route.size(); ++k) out.push_back(route[k].node);
  return out;
}

Environment::Environment(const Instance& inst) : inst_(&inst) {
  const int count = inst.node_count();
  safe_return_kwh_.assign(count, 0.0);
  for (int j = 0; j < count; ++j) {
    double best = inst.edges.energy(j, 0);
    for (int c = 1 + 2 * inst.request_count(); c < count; ++c)
      best = std::min(best, inst.edges.energy(j, c));
    safe_return_kwh_[j] = best;
  }
}

FleetEpisodeState Environment::reset(bool record_routes) const {
  FleetEpisodeState s;
  const int n = inst_->request_count();
  s.vehicle = VehicleState{};
  s.vehicle.onboard.reserve(inst_->fleet.capacity);
  s.vehicles_used = 1;
  s.visited.assign(inst_->node_count(), 0);
  s.served_pickups.assign(n, 0);
  s.served_deliveries.assign(n, 0);
  s.record_routes = record_routes;
  if (record_routes) s.routes.push_back({RouteStop{0, 0.0, 0.0, 1.0, 0.0, 0}});
  return s;
}

bool Environment::vehicle_rules(const VehicleState& v, int j) const {
  const Instance& inst = *inst_;
  const Node& node = inst.nodes[j];

  // (2) capacity
  const int load = v.load + node.load_delta;
  if (load < 0 || load > inst.fleet.capacity) return false;

  // (5) operational rules
  const NodeKind here = inst.nodes[v.node].kind;
  if (node.kind == NodeKind::Depot && v.load > 0) return false;
  if (node.kind == NodeKind::Charger &&
      (v.load > 0 || here == NodeKind::Charger || here == NodeKind::Depot))
    return false;

  // (3) time windows; deliveries are soft on l but hard on ride time
  const double start = std::max(v.clock + inst.edges.time(v.node, j), node.window_open);
  if (node.kind == NodeKind::Pickup || node.kind == NodeKind::Charger) {
    if (start > node.window_close) return false;
  } else if (node.kind == NodeKind::Delivery) {
    const Request& req = inst.requests[node.request];
    if (start - v.pickup_start(node.request) > req.max_ride_time) return false;
  }

  // (4) battery with reserve, including a safe place to go afterwards
  const double B = inst.fleet.battery_kwh;
  const double rho = inst.fleet.soc_reserve;
  const double after = v.soc - inst.edges.energy(v.node, j) / B;
  if (after < rho) return false;
  if (after - safe_return_kwh_[j] / B < rho) return false;
  return true;
}

StepCost Environment::advance(VehicleState& v, int j, Travel travel,
                              double* charge_delta) const {
  const Instance& inst = *inst_;
  const Node& node = inst.nodes[j];
  StepCost cost;
  cost.travel_s = travel.time;
  cost.energy_kwh = travel.energy;

  const double arrival = v.clock + travel.time;
  const double start = std::max(arrival, node.window_open);
  if (node.kind == NodeKind::Pickup) cost.wait_s = std::max(0.0, node.window_open - arrival);
  if (node.kind == NodeKind::Delivery) cost.late_s = std::max(0.0, start - node.window_close);

  const double B = inst.fleet.battery_kwh;
  const double soc_arrival = v.soc - travel.energy / B;
  double delta = 0.0;
  if (node.kind == NodeKind::Charger) {
    const double power = charging_power_kw(std::clamp(soc_arrival, 0.0, 1.0));
    delta = std::min(charge_soc_gain(power, node.service_time, B), 1.0 - soc_arrival);
  }
  if (charge_delta) *charge_delta = delta;

  v.node = j;
  v.clock = start + node.service_time;
  v.soc = soc_arrival + delta;
  v.load += node.load_delta;
  if (node.kind == NodeKind::Pickup) {
    v.onboard.push_back({node.request, start});
  } else if (node.kind == NodeKind::Delivery) {
    std::erase_if(v.onboard,
                  [r = node.request](const OnboardPassenger& p) { return p.request == r; });
  }
  return cost;
}

// True when every onboard passenger can still be dropped off, in some order,
// followed by a return to the depot, all within the regular rules.
bool Environment::completion_exists(const VehicleState& v, std::vector<int>* order) const {
  if (v.onboard.empty()) {
    if (!vehicle_rules(v, 0)) return false;
    if (order) order->push_back(0);
    return true;
  }
  for (const auto& p : v.onboard) {
    const int d = inst_->delivery_of(p.request);
    if (!vehicle_rules(v, d)) continue;
    VehicleState next = v;
    move(next, d);
    if (order) order->push_back(d);
    if (completion_exists(next, order)) return true;
    if (order) order->pop_back();
  }
  return false;
}

bool Environment::lookahead_ok(const VehicleState& v, int j) const {
  VehicleState next = v;
  move(next, j);
  return completion_exists(next, nullptr);
}

bool Environment::completion_order(const VehicleState& v, std::vector<int>& order) const {
  order.clear();
  return completion_exists(v, &order);
}

StepCost Environment::move(VehicleState& v, int j) const {
  return advance(v, j, {inst_->edges.time(v.node, j), inst_->edges.energy(v.node, j)}, nullptr);
}

bool Environment::vehicle_allows(const VehicleState& v, int j) const {
  const Node& node = inst_->nodes[j];
  if (node.kind == NodeKind::Delivery && !v.carries(node.request)) return false;
  if (!vehicle_rules(v, j)) return false;
  if (node.kind == NodeKind::Depot) return true;
  return lookahead_ok(v, j);
}

bool Environment::allowed(const FleetEpisodeState& s, int j) const {
  if (s.terminal) return false;
  // (1) no revisits
  if (j != 0 && s.visited[j]) return false;
  return vehicle_allows(s.vehicle, j);
}

FeasibilityMask Environment::feasibility_mask(const FleetEpisodeState& s) const {
  const int count = inst_->node_count();
  FeasibilityMask mask;
  mask.allowed.assign(count, 0);
  if (s.terminal) return mask;
  for (int j = 0; j < count; ++j) mask.allowed[j] = allowed(s, j) ? 1 : 0;
  if (mask.any()) return mask;

  // Only reachable when realized noise voided the lookahead's plan: let the
  // vehicle unload (or go home) regardless of reserve and ride limits.
  mask.fallback = true;
  if (s.vehicle.load > 0) {
    for (const auto& p : s.vehicle.onboard) mask.allowed[inst_->delivery_of(p.request)] = 1;
  } else {
    mask.allowed[0] = 1;
  }
  return mask;
}

StepInfo Environment::apply(FleetEpisodeState& s, int action, NoiseSampler* noise) const {
  const Instance& inst = *inst_;
  if (s.terminal) throw ContractViolation("step after terminal state");
  if (action < 0 || action >= inst.node_count())
    throw ContractViolation("action " + std::to_string(action) + " out of range");
  bool fallback = false;
  if (!allowed(s, action)) {
    const FeasibilityMask mask = feasibility_mask(s);
    if (!mask.fallback || !mask.allowed[action])
      throw ContractViolation("action " + std::to_string(action) + " blocked by the mask");
    fallback = true;
  }

  Travel travel{inst.edges.time(s.vehicle.node, action),
                inst.edges.energy(s.vehicle.node, action)};
  if (noise && noise->enabled()) {
    const double z = noise->draw_z();
    travel.time = sample_noise(travel.time, noise->scale(), z);
    travel.energy = sample_noise(travel.energy, noise->scale(), z);
  }

  StepInfo info;
  const double arrival = s.vehicle.clock + travel.time;
  info.incurred = advance(s.vehicle, action, travel, &info.charge_delta);
  ++s.steps;

  const Node& node = inst.nodes[action];
  switch (node.kind) {
    case NodeKind::Pickup:
      s.served_pickups[node.request] = 1;
      break;
    case NodeKind::Delivery:
      s.served_deliveries[node.request] = 1;
      ++s.served;
      break;
    case NodeKind::Charger:
      ++s.totals.charge_visits;
      break;
    case NodeKind::Depot:
      break;
  }
  if (node.kind != NodeKind::Depot) s.visited[action] = 1;

  s.totals.energy_kwh += info.incurred.energy_kwh;
  s.totals.wait_s += info.incurred.wait_s;
  s.totals.late_s += info.incurred.late_s;
  s.totals.travel_s += info.incurred.travel_s;
  if (fallback) ++s.totals.fallback_steps;

  if (s.record_routes) {
    s.routes.back().push_back({action, arrival, s.vehicle.clock - node.service_time,
                               s.vehicle.soc, info.charge_delta, s.vehicle.load});
  }

  if (node.kind == NodeKind::Depot) {
    if (s.served == inst.request_count() || s.vehicles_used >= inst.fleet.vehicles) {
      s.terminal = true;
      info.terminal = true;
    } else {
      s.vehicle = VehicleState{};
      s.vehicle.onboard.reserve(inst.fleet.capacity);
      ++s.vehicles_used;
      info.vehicle_reset = true;
      if (s.record_routes) s.routes.push_back({RouteStop{0, 0.0, 0.0, 1.0, 0.0, 0}});
    }
  }
  return info;
}

StepOutcome Environment::step(const FleetEpisodeState& s, int action, NoiseSampler* noise) const {
  StepOutcome out{s, {}};
  out.info = apply(out.next, action, noise);
  return out;
}

Solution make_solution(const Instance& inst, const FleetEpisodeState& s) {
  Solution sol;
  sol.routes = s.routes;
  sol.served = s.served;
  sol.requests = inst.request_count();

  const CostWeights& w = inst.weights;
  sol.cost.energy_kwh = s.totals.energy_kwh;
  sol.cost.wait_s = s.totals.wait_s;
  sol.cost.late_s = s.totals.late_s;
  sol.cost.travel_s = s.totals.travel_s;
  sol.cost.objective = objective_value(w, s.totals);
  sol.cost.reward = -sol.cost.objective + w.complete * s.served;

  SolutionMetrics& m = sol.metrics;
  m.completion_rate =
      sol.requests == 0 ? 1.0 : static_cast<double>(s.served) / sol.requests;
  double load_sum = 0.0;
  int loaded_segments = 0;
  for (const auto& route : s.routes) {
    bool used = false;
    for (std::size_t k = 0; k < route.size(); ++k) {
      if (route[k].node != 0) used = true;
      if (k + 1 < route.size() && route[k].load >= 1) {
        load_sum += route[k].load;
        ++loaded_segments;
      }
    }
    if (used) ++m.vehicles_used;
  }
  m.load_factor = loaded_segments ? load_sum / loaded_segments : 0.0;
  m.charge_visits = s.totals.charge_visits;
  m.energy_per_vehicle_kwh = m.vehicles_used ? s.totals.energy_kwh / m.vehicles_used : 0.0;
  m.wait_per_request_s = s.served ? s.totals.wait_s / s.served : 0.0;
  m.late_per_request_s = s.served ? s.totals.late_s / s.served : 0.0;
  m.fallback_steps = s.totals.fallback_steps;
  return sol;
}

Solution replay_actions(const Instance& inst, const std::vector<int>& actions) {
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const int a = actions[t];
    if (s.terminal)
      throw ReplayError(static_cast<int>(t), a,
                        "replay: action at step " + std::to_string(t) + " after termination");
    if (a < 0 || a >= inst.node_count() || !env.allowed(s, a))
      throw ReplayError(static_cast<int>(t), a,
                        "replay: step " + std::to_string(t) + " visits node " +
                            std::to_string(a) + " which the feasibility mask blocks");
    env.apply(s, a);
  }
  if (!s.terminal)
    throw ReplayError(static_cast<int>(actions.size()), -1, "replay: episode did not terminate");
  return make_solution(inst, s);
}

Solution replay_routes(const Instance& inst, const std::vector<std::vector<int>>& routes) {
  std::vector<int> actions;
  for (const auto& r : routes) {
    actions.insert(actions.end(), r.begin(), r.end());
    actions.push_back(0);
  }
  const Environment env(inst);
  FleetEpisodeState s = env.reset(false);
  std::size_t t = 0;
  for (; t < actions.size() && !s.terminal; ++t) {
    if (!env.allowed(s, actions[t])) return replay_actions(inst, actions);
    env.apply(s, actions[t]);
  }
  if (s.terminal) {
    // Anything listed past termination must be empty vehicles.
    for (std::size_t k = t; k < actions.size(); ++k)
      if (actions[k] != 0)
        throw ReplayError(static_cast<int>(k), actions[k], "replay: stops after termination");
    actions.resize(t);
  } else {
    while (!s.terminal) {
      env.apply(s, 0);
      actions.push_back(0);
    }
  }
  return replay_actions(inst, actions);
}

ScoreResult score_solution(const Solution& sol, const Instance& inst) {
  const Solution replayed = replay_actions(inst, sol.actions());
  return {replayed.cost.objective, replayed.cost.reward, replayed.metrics};
}

}  // namespace edarp
