#include "edarp/alns.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "edarp/error.hpp"
#include "edarp/greedy.hpp"

namespace edarp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kImprovementEps = 1e-9;

void recompute_totals(Plan& plan) {
  plan.objective = 0.0;
  plan.served = 0;
  for (const RouteCost& c : plan.costs) {
    plan.objective += c.objective;
    plan.served += c.served;
  }
}

int request_of(const Instance& inst, int node) { return inst.nodes[node].request; }

bool is_request_node(const Instance& inst, int node) {
  const NodeKind k = inst.nodes[node].kind;
  return k == NodeKind::Pickup || k == NodeKind::Delivery;
}

std::vector<int> unserved_requests(const Plan& plan, const Instance& inst) {
  std::vector<std::uint8_t> served(inst.request_count(), 0);
  for (int r : served_requests(plan, inst)) served[r] = 1;
  std::vector<int> out;
  for (int r = 0; r < inst.request_count(); ++r)
    if (!served[r]) out.push_back(r);
  return out;
}

// Vehicle states after each prefix of a feasible route, with the running cost.
struct Prefix {
  std::vector<VehicleState> states;
  std::vector<double> costs;
};

Prefix route_prefix(const std::vector<int>& route, const PlanEvaluator& ev) {
  Prefix p;
  p.states.reserve(route.size() + 1);
  p.costs.reserve(route.size() + 1);
  VehicleState v;
  double cost = 0.0;
  p.states.push_back(v);
  p.costs.push_back(cost);
  for (int node : route) {
    cost += ev.step_cost(ev.env().move(v, node));
    p.states.push_back(v);
    p.costs.push_back(cost);
  }
  return p;
}

// Cost of finishing `route` from position `from` (then the depot) starting in
// state v; +inf when the mask rejects a move.
double finish_cost(VehicleState v, const std::vector<int>& route, std::size_t from,
                   const PlanEvaluator& ev) {
  const Environment& env = ev.env();
  double cost = 0.0;
  for (std::size_t k = from; k < route.size(); ++k) {
    if (!env.vehicle_allows(v, route[k])) return kInf;
    cost += ev.step_cost(env.move(v, route[k]));
  }
  if (!env.vehicle_allows(v, 0)) return kInf;
  return cost + ev.step_cost(env.move(v, 0));
}

template <typename Visit>
void for_each_insertion(const std::vector<int>& route, const Prefix& prefix, double route_cost,
                        int request, const PlanEvaluator& ev, Visit&& visit) {
  const Environment& env = ev.env();
  const Instance& inst = env.instance();
  const int p = inst.pickup_of(request);
  const int d = inst.delivery_of(request);
  const int len = static_cast<int>(route.size());
  for (int i = 0; i <= len; ++i) {
    VehicleState carry = prefix.states[i];
    if (!env.vehicle_allows(carry, p)) continue;
    double carry_cost = prefix.costs[i] + ev.step_cost(env.move(carry, p));
    for (int j = i; j <= len; ++j) {
      if (env.vehicle_allows(carry, d)) {
        VehicleState w = carry;
        const double c = carry_cost + ev.step_cost(env.move(w, d));
        const double rest = finish_cost(std::move(w), route, j, ev);
        if (rest < kInf) visit(i, j, c + rest - route_cost);
      }
      if (j == len || !env.vehicle_allows(carry, route[j])) break;
      carry_cost += ev.step_cost(env.move(carry, route[j]));
    }
  }
}

// Routes worth probing for insertions: all non-empty ones plus the first empty one.
std::vector<int> candidate_routes(const Plan& plan) {
  std::vector<int> out;
  bool empty_taken = false;
  for (int k = 0; k < static_cast<int>(plan.routes.size()); ++k) {
    if (plan.routes[k].empty()) {
      if (empty_taken) continue;
      empty_taken = true;
    }
    out.push_back(k);
  }
  return out;
}

std::vector<int> without_request(const std::vector<int>& route, const Instance& inst, int r) {
  std::vector<int> out;
  out.reserve(route.size());
  for (int node : route)
    if (!(is_request_node(inst, node) && request_of(inst, node) == r)) out.push_back(node);
  return out;
}

}  // namespace

std::string_view to_string(DestroyOp op) {
  switch (op) {
    case DestroyOp::Random: return "random_removal";
    case DestroyOp::Shaw: return "shaw_removal";
    case DestroyOp::Worst: return "worst_removal";
  }
  return "unknown";
}

std::string_view to_string(RepairOp op) {
  switch (op) {
    case RepairOp::Random: return "random_insert";
    case RepairOp::Regret2: return "regret2_insert";
    case RepairOp::Regret3: return "regret3_insert";
  }
  return "unknown";
}

void validate(const AlnsConfig& cfg) {
  if (cfg.max_iterations < 0) throw UsageError("alns: max_iterations must be >= 0");
  if (cfg.segment_length < 1) throw UsageError("alns: segment_length must be >= 1");
  if (!(cfg.removal_min > 0.0 && cfg.removal_min <= cfg.removal_max && cfg.removal_max < 1.0))
    throw UsageError("alns: removal fraction range must satisfy 0 < min <= max < 1");
  if (!(cfg.rtr_decay > 0.0 && cfg.rtr_decay < 1.0))
    throw UsageError("alns: rtr_decay must lie in (0, 1)");
  if (cfg.rtr_init_fraction < 0.0) throw UsageError("alns: rtr_init_fraction must be >= 0");
  if (!(cfg.min_weight > 0.0)) throw UsageError("alns: min_weight must be > 0");
  if (!(cfg.weight_decay >= 0.0 && cfg.weight_decay <= 1.0))
    throw UsageError("alns: weight_decay must lie in [0, 1]");
  if (cfg.shaw_exponent < 1.0) throw UsageError("alns: shaw_exponent must be >= 1");
}

double rtr_initial_tolerance(double initial_objective, const AlnsConfig& cfg) {
  return cfg.rtr_init_fraction * std::abs(initial_objective);
}

// ---- PlanEvaluator ----

PlanEvaluator::PlanEvaluator(const Environment& env) : env_(&env) {}

double PlanEvaluator::step_cost(const StepCost& c) const {
  return objective_value(env_->instance().weights, c.energy_kwh, c.wait_s, c.late_s, c.travel_s);
}

RouteCost PlanEvaluator::evaluate_route(const std::vector<int>& route) const {
  const Instance& inst = env_->instance();
  RouteCost rc;
  VehicleState v;
  for (int node : route) {
    if (node <= 0 || node >= inst.node_count() || !env_->vehicle_allows(v, node)) return rc;
    rc.objective += step_cost(env_->move(v, node));
    if (inst.nodes[node].kind == NodeKind::Delivery) ++rc.served;
  }
  if (!env_->vehicle_allows(v, 0)) return rc;
  rc.objective += step_cost(env_->move(v, 0));
  rc.feasible = true;
  return rc;
}

Plan PlanEvaluator::evaluate(const Routes& routes) const {
  Plan plan;
  plan.routes = routes;
  for (const auto& r : routes) plan.costs.push_back(evaluate_route(r));
  recompute_totals(plan);
  return plan;
}

RouteCost PlanEvaluator::repair_route(std::vector<int>& route) const {
  const Instance& inst = env_->instance();
  std::vector<std::uint8_t> dropped(inst.request_count(), 0);
  std::vector<int> kept;
  kept.reserve(route.size());
  VehicleState v;
  for (int node : route) {
    const Node& nd = inst.nodes[node];
    if (nd.kind == NodeKind::Delivery && dropped[nd.request]) continue;
    if (env_->vehicle_allows(v, node)) {
      env_->move(v, node);
      kept.push_back(node);
    } else if (nd.kind == NodeKind::Pickup) {
      dropped[nd.request] = 1;
    }
  }
  std::vector<int> order;
  if (!env_->completion_order(v, order))
    throw ContractViolation("alns: no legal completion for a decoded route");
  for (int node : order)
    if (node != 0) kept.push_back(node);
  route = std::move(kept);
  RouteCost rc = evaluate_route(route);
  if (!rc.feasible) throw ContractViolation("alns: lenient decode produced an infeasible route");
  return rc;
}

Plan PlanEvaluator::from_solution(const Solution& sol) const {
  Routes routes(env_->instance().fleet.vehicles);
  for (std::size_t k = 0; k < sol.routes.size() && k < routes.size(); ++k)
    for (const RouteStop& stop : sol.routes[k])
      if (stop.node != 0) routes[k].push_back(stop.node);
  return evaluate(routes);
}

// ---- destroy ----

std::vector<int> served_requests(const Plan& plan, const Instance& inst) {
  std::vector<int> out;
  for (const auto& route : plan.routes)
    for (int node : route)
      if (inst.nodes[node].kind == NodeKind::Delivery) out.push_back(inst.nodes[node].request);
  std::sort(out.begin(), out.end());
  return out;
}

Destroyed remove_requests(const Plan& plan, const std::vector<int>& requests,
                          const PlanEvaluator& ev) {
  const Instance& inst = ev.env().instance();
  std::vector<std::uint8_t> gone(inst.request_count(), 0);
  for (int r : requests) gone[r] = 1;
  Destroyed out;
  out.plan = plan;
  out.removed = requests;
  const auto before = served_requests(plan, inst);
  for (std::size_t k = 0; k < out.plan.routes.size(); ++k) {
    auto& route = out.plan.routes[k];
    const auto it = std::remove_if(route.begin(), route.end(), [&](int node) {
      return is_request_node(inst, node) && gone[request_of(inst, node)];
    });
    if (it == route.end()) continue;
    route.erase(it, route.end());
    RouteCost rc = ev.evaluate_route(route);
    if (!rc.feasible) rc = ev.repair_route(route);
    out.plan.costs[k] = rc;
  }
  recompute_totals(out.plan);
  // Requests lost to the lenient decode count as removed too.
  const auto after = served_requests(out.plan, inst);
  for (int r : before)
    if (!gone[r] && !std::binary_search(after.begin(), after.end(), r)) out.removed.push_back(r);
  return out;
}

Destroyed random_removal(const Plan& plan, int q, Rng& rng, const PlanEvaluator& ev) {
  std::vector<int> served = served_requests(plan, ev.env().instance());
  q = std::clamp(q, 0, static_cast<int>(served.size()));
  for (int t = 0; t < q; ++t) {
    const int k = uniform_int(rng, t, static_cast<int>(served.size()) - 1);
    std::swap(served[t], served[k]);
  }
  served.resize(q);
  return remove_requests(plan, served, ev);
}

double shaw_relatedness(const Instance& inst, int r, int s, const AlnsConfig& cfg) {
  const auto& delta = inst.edges.time;
  const double dmax = delta.max();
  const int pr = inst.pickup_of(r), ps = inst.pickup_of(s);
  const int dr = inst.delivery_of(r), ds = inst.delivery_of(s);
  const double travel = dmax > 0.0 ? (delta(pr, ps) + delta(dr, ds)) / dmax : 0.0;
  const double time = (std::abs(inst.nodes[pr].window_open - inst.nodes[ps].window_open) +
                       std::abs(inst.nodes[dr].window_open - inst.nodes[ds].window_open)) /
                      inst.horizon;
  return cfg.shaw_travel_weight * travel + cfg.shaw_time_weight * time;
}

Destroyed shaw_removal(const Plan& plan, int q, Rng& rng, const AlnsConfig& cfg,
                       const PlanEvaluator& ev) {
  const Instance& inst = ev.env().instance();
  std::vector<int> pool = served_requests(plan, inst);
  q = std::clamp(q, 0, static_cast<int>(pool.size()));
  std::vector<int> removed;
  if (q > 0) {
    const int seed = uniform_int(rng, 0, static_cast<int>(pool.size()) - 1);
    removed.push_back(pool[seed]);
    pool.erase(pool.begin() + seed);
  }
  std::vector<std::pair<double, int>> ranked;
  while (static_cast<int>(removed.size()) < q) {
    ranked.clear();
    for (int r : pool) {
      double rel = kInf;
      for (int s : removed) rel = std::min(rel, shaw_relatedness(inst, r, s, cfg));
      ranked.emplace_back(rel, r);
    }
    std::sort(ranked.begin(), ranked.end());
    const double y = uniform01(rng);
    const auto idx = static_cast<std::size_t>(std::pow(y, cfg.shaw_exponent) * ranked.size());
    const int pick = ranked[std::min(idx, ranked.size() - 1)].second;
    removed.push_back(pick);
    pool.erase(std::find(pool.begin(), pool.end(), pick));
  }
  return remove_requests(plan, removed, ev);
}

Destroyed worst_removal(const Plan& plan, int q, const PlanEvaluator& ev) {
  const Instance& inst = ev.env().instance();
  Destroyed out;
  out.plan = plan;
  const int n = inst.request_count();
  // gain[r]: score saved by removing r, after the same lenient decode remove_requests uses.
  const CostWeights& w = inst.weights;
  auto score = [&](const RouteCost& rc) { return rc.objective - w.complete * rc.served; };
  std::vector<double> gain(n, -kInf);
  std::vector<int> route_of(n, -1);
  auto refresh = [&](int k) {
    for (int r = 0; r < n; ++r)
      if (route_of[r] == k) route_of[r] = -1;
    for (int node : out.plan.routes[k]) {
      if (inst.nodes[node].kind != NodeKind::Delivery) continue;
      const int r = inst.nodes[node].request;
      route_of[r] = k;
      std::vector<int> shorter = without_request(out.plan.routes[k], inst, r);
      RouteCost rc = ev.evaluate_route(shorter);
      if (!rc.feasible) rc = ev.repair_route(shorter);
      gain[r] = score(out.plan.costs[k]) - score(rc);
    }
  };
  for (int k = 0; k < static_cast<int>(out.plan.routes.size()); ++k) refresh(k);

  for (int t = 0; t < q; ++t) {
    int pick = -1;
    for (int r = 0; r < n; ++r) {
      if (route_of[r] < 0) continue;
      if (pick < 0 || gain[r] > gain[pick]) pick = r;
    }
    if (pick < 0) break;
    Destroyed step = remove_requests(out.plan, {pick}, ev);
    out.plan = std::move(step.plan);
    for (int r : step.removed) out.removed.push_back(r);
    // A lenient decode may also touch other requests of the same route.
    const int k = route_of[pick];
    refresh(k);
    for (int r : step.removed) route_of[r] = -1;
  }
  return out;
}

// ---- repair ----

std::vector<Insertion> feasible_insertions(const Plan& plan, int request,
                                           const PlanEvaluator& ev) {
  std::vector<Insertion> out;
  for (int k : candidate_routes(plan)) {
    const auto& route = plan.routes[k];
    const Prefix prefix = route_prefix(route, ev);
    for_each_insertion(route, prefix, plan.costs[k].objective, request, ev,
                       [&](int i, int j, double delta) {
                         out.push_back({request, k, i, j, delta});
                       });
  }
  return out;
}

void apply_insertion(Plan& plan, const Insertion& ins, const PlanEvaluator& ev) {
  const Instance& inst = ev.env().instance();
  auto& route = plan.routes[ins.route];
  std::vector<int> next;
  next.reserve(route.size() + 2);
  for (int k = 0; k <= static_cast<int>(route.size()); ++k) {
    if (k == ins.pickup_pos) next.push_back(inst.pickup_of(ins.request));
    if (k == ins.delivery_pos) next.push_back(inst.delivery_of(ins.request));
    if (k < static_cast<int>(route.size())) next.push_back(route[k]);
  }
  route = std::move(next);
  plan.costs[ins.route] = ev.evaluate_route(route);
  if (!plan.costs[ins.route].feasible)
    throw ContractViolation("alns: insertion produced an infeasible route");
  recompute_totals(plan);
}

Plan random_insert(Plan plan, std::vector<int> pool, Rng& rng, const PlanEvaluator& ev) {
  for (std::size_t t = 0; t + 1 < pool.size(); ++t) {
    const int k = uniform_int(rng, static_cast<int>(t), static_cast<int>(pool.size()) - 1);
    std::swap(pool[t], pool[k]);
  }
  for (int r : pool) {
    const auto options = feasible_insertions(plan, r, ev);
    if (options.empty()) continue;
    const int pick = uniform_int(rng, 0, static_cast<int>(options.size()) - 1);
    apply_insertion(plan, options[pick], ev);
  }
  return plan;
}

namespace {

// The k cheapest insertions of one request into one route.
struct TopK {
  std::vector<Insertion> best;
  void offer(const Insertion& ins, int k) {
    auto it = std::upper_bound(best.begin(), best.end(), ins.delta,
                               [](double d, const Insertion& x) { return d < x.delta; });
    if (static_cast<int>(it - best.begin()) >= k) return;
    best.insert(it, ins);
    if (static_cast<int>(best.size()) > k) best.pop_back();
  }
};

}  // namespace

Plan regret_insert(Plan plan, std::vector<int> pool, int k, const PlanEvaluator& ev) {
  if (k < 2) throw UsageError("regret_insert: k must be >= 2");
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  const int routes = static_cast<int>(plan.routes.size());
  // cache[p][route]: top-k insertions of pool[p]; only probed routes are filled.
  std::vector<std::vector<TopK>> cache(pool.size(), std::vector<TopK>(routes));
  std::vector<int> probed = candidate_routes(plan);

  auto fill_route = [&](int route) {
    const Prefix prefix = route_prefix(plan.routes[route], ev);
    for (std::size_t p = 0; p < pool.size(); ++p) {
      TopK& t = cache[p][route];
      t.best.clear();
      for_each_insertion(plan.routes[route], prefix, plan.costs[route].objective, pool[p], ev,
                         [&](int i, int j, double delta) { t.offer({pool[p], route, i, j, delta}, k); });
    }
  };
  for (int r : probed) fill_route(r);

  while (!pool.empty()) {
    int chosen = -1;
    double chosen_regret = -kInf;
    Insertion chosen_ins;
    std::vector<Insertion> merged;
    for (std::size_t p = 0; p < pool.size(); ++p) {
      merged.clear();
      for (int r : probed) merged.insert(merged.end(), cache[p][r].best.begin(), cache[p][r].best.end());
      if (merged.empty()) continue;
      std::stable_sort(merged.begin(), merged.end(),
                       [](const Insertion& a, const Insertion& b) { return a.delta < b.delta; });
      double regret = kInf;
      if (static_cast<int>(merged.size()) >= k) {
        regret = 0.0;
        for (int m = 1; m < k; ++m) regret += merged[m].delta - merged[0].delta;
      }
      bool better = chosen < 0 || regret > chosen_regret;
      if (!better && regret == kInf && chosen_regret == kInf)
        better = merged[0].delta < chosen_ins.delta;
      if (better) {
        chosen = static_cast<int>(p);
        chosen_regret = regret;
        chosen_ins = merged[0];
      }
    }
    if (chosen < 0) break;
    apply_insertion(plan, chosen_ins, ev);
    pool.erase(pool.begin() + chosen);
    cache.erase(cache.begin() + chosen);

    const std::vector<int> next_probed = candidate_routes(plan);
    for (int r : next_probed)
      if (r == chosen_ins.route ||
          std::find(probed.begin(), probed.end(), r) == probed.end())
        fill_route(r);
    probed = next_probed;
  }
  return plan;
}

// ---- search ----

Plan prune_chargers(Plan plan, const PlanEvaluator& ev) {
  const Instance& inst = ev.env().instance();
  for (std::size_t k = 0; k < plan.routes.size(); ++k) {
    auto& route = plan.routes[k];
    for (std::size_t i = 0; i < route.size();) {
      if (inst.nodes[route[i]].kind != NodeKind::Charger) {
        ++i;
        continue;
      }
      std::vector<int> trial = route;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      const RouteCost rc = ev.evaluate_route(trial);
      if (rc.feasible && rc.objective < plan.costs[k].objective - kImprovementEps) {
        route = std::move(trial);
        plan.costs[k] = rc;
      } else {
        ++i;
      }
    }
  }
  recompute_totals(plan);
  return plan;
}

AlnsResult alns_solve(const Instance& inst, const AlnsConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const Environment env(inst);
  const PlanEvaluator ev(env);
  const CostWeights& w = inst.weights;

  AlnsResult result;
  result.initial = greedy_solve(inst);
  const Plan initial = ev.from_solution(result.initial);
  for (const RouteCost& c : initial.costs)
    if (!c.feasible) throw ContractViolation("alns: greedy start does not decode as a plan");

  Plan current = initial;
  Plan best = initial;
  double best_score = best.score(w);
  double current_score = best_score;
  double tolerance = rtr_initial_tolerance(best_score, cfg);
  Rng rng = make_rng(cfg.seed, "alns");

  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (cfg.time_limit_s > 0.0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;
      if (elapsed.count() >= cfg.time_limit_s) break;
    }
    const int d = roulette(result.destroy_weights, rng);
    const int r = roulette(result.repair_weights, rng);
    const Plan& base = cfg.acceptance ? current : initial;

    const int served = base.served;
    int q = 0;
    if (served > 0) {
      const double frac = uniform(rng, cfg.removal_min, cfg.removal_max);
      q = std::clamp(static_cast<int>(std::lround(frac * served)), 1, served);
    }

    Destroyed destroyed;
    switch (static_cast<DestroyOp>(d)) {
      case DestroyOp::Random: destroyed = random_removal(base, q, rng, ev); break;
      case DestroyOp::Shaw: destroyed = shaw_removal(base, q, rng, cfg, ev); break;
      case DestroyOp::Worst: destroyed = worst_removal(base, q, ev); break;
    }
    std::vector<int> pool = unserved_requests(destroyed.plan, inst);
    Plan candidate;
    switch (static_cast<RepairOp>(r)) {
      case RepairOp::Random: candidate = random_insert(std::move(destroyed.plan), pool, rng, ev); break;
      case RepairOp::Regret2: candidate = regret_insert(std::move(destroyed.plan), pool, 2, ev); break;
      case RepairOp::Regret3: candidate = regret_insert(std::move(destroyed.plan), pool, 3, ev); break;
    }
    candidate = prune_chargers(std::move(candidate), ev);
    const double score = candidate.score(w);

    double credit = 0.0;
    if (score < best_score - kImprovementEps) {
      credit = cfg.sigma_best;
      best = candidate;
      best_score = score;
      if (cfg.acceptance) {
        current = std::move(candidate);
        current_score = score;
      }
    } else if (cfg.acceptance && rtr_accept(score, best_score, tolerance)) {
      credit = score < current_score - kImprovementEps ? cfg.sigma_better : cfg.sigma_accepted;
      current = std::move(candidate);
      current_score = score;
    }
    if (cfg.adaptive) {
      result.destroy_weights.score[d] += credit;
      ++result.destroy_weights.uses[d];
      result.repair_weights.score[r] += credit;
      ++result.repair_weights.uses[r];
      if ((it + 1) % cfg.segment_length == 0) {
        update_weights(result.destroy_weights, cfg);
        update_weights(result.repair_weights, cfg);
      }
    }
    result.best_history.push_back(best_score);
    if (cfg.record_telemetry) {
      result.telemetry.push_back({it, best_score, current_score, score, tolerance, d, r,
                                  result.destroy_weights.weight, result.repair_weights.weight});
    }
    tolerance *= cfg.rtr_decay;
  }
  result.iterations = it;
  result.best = replay_routes(inst, best.routes);
  return result;
}

std::string telemetry_csv(const std::vector<AlnsIterationLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,best_j,current_j,candidate_j,tolerance,destroy,repair";
  for (int i = 0; i < kDestroyOps; ++i) out << ",w_" << to_string(static_cast<DestroyOp>(i));
  for (int i = 0; i < kRepairOps; ++i) out << ",w_" << to_string(static_cast<RepairOp>(i));
  out << '\n';
  for (const auto& row : log) {
    out << row.iteration << ',' << row.best << ',' << row.current << ',' << row.candidate << ','
        << row.tolerance << ',' << to_string(static_cast<DestroyOp>(row.destroy)) << ','
        << to_string(static_cast<RepairOp>(row.repair));
    for (double x : row.destroy_weights) out << ',' << x;
    for (double x : row.repair_weights) out << ',' << x;
    out << '\n';
  }
  return out.str();
}

}  // namespace edarp
