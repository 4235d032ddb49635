#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "edarp/environment.hpp"

namespace edarp::testing {

// Exact: logged constraints plus times and SoC recomputed from the edge matrices.
// Logged: constraints checked on the logged values only.
// Structural: capacity, precedence, revisits, depots (what noise cannot break).
enum class Audit { Exact, Logged, Structural };

// Independent audit of a logged solution. Empty string when every check passes.
inline std::string audit_solution(const Instance& inst, const Solution& sol, Audit mode,
                                  double tol = 1e-9) {
  const bool timing = mode != Audit::Structural;
  const bool deterministic = mode == Audit::Exact;
  std::ostringstream err;
  const double rho = inst.fleet.soc_reserve;
  const double B = inst.fleet.battery_kwh;
  std::vector<int> seen(inst.node_count(), 0);
  int served = 0;
  for (std::size_t k = 0; k < sol.routes.size(); ++k) {
    const auto& route = sol.routes[k];
    if (route.empty() || route.front().node != 0) {
      err << "route " << k << " does not start at the depot; ";
      continue;
    }
    if (route.front().soc != 1.0) err << "route " << k << " starts with soc != 1; ";
    int load = 0;
    std::map<int, double> onboard;
    double clock = route.front().service_start;
    double soc = 1.0;
    for (std::size_t t = 1; t < route.size(); ++t) {
      const RouteStop& prev = route[t - 1];
      const RouteStop& st = route[t];
      const int j = st.node;
      const Node& node = inst.nodes[j];
      const std::string at = "route " + std::to_string(k) + " stop " + std::to_string(t) + ": ";
      if (j != 0 && seen[j]++) err << at << "node " << j << " revisited; ";
      if (timing && st.service_start + tol < st.arrival) err << at << "service before arrival; ";
      if (st.service_start + tol < node.window_open) err << at << "service before window; ";
      if (st.arrival + tol < prev.service_start) err << at << "clock went backwards; ";
      if (timing && (node.kind == NodeKind::Pickup || node.kind == NodeKind::Charger) &&
          st.service_start > node.window_close + tol)
        err << at << "service after window close; ";
      load += node.load_delta;
      if (load < 0 || load > inst.fleet.capacity) err << at << "load " << load << " out of range; ";
      if (st.load != load) err << at << "logged load mismatch; ";
      if (node.kind == NodeKind::Pickup) {
        onboard[node.request] = st.service_start;
      } else if (node.kind == NodeKind::Delivery) {
        auto it = onboard.find(node.request);
        if (it == onboard.end()) {
          err << at << "delivery without pickup on this route; ";
        } else {
          if (timing && st.service_start - it->second > inst.requests[node.request].max_ride_time + tol)
            err << at << "ride time exceeded; ";
          onboard.erase(it);
          ++served;
        }
      } else if (node.kind == NodeKind::Charger && load > 0) {
        err << at << "charging with passengers; ";
      }
      if (timing && st.soc < rho - 1e-12) err << at << "soc " << st.soc << " below reserve; ";
      if (st.soc > 1.0 + 1e-12) err << at << "soc above 1; ";
      if (deterministic) {
        const double arrival = clock + inst.edges.time(prev.node, j);
        const double start = std::max(arrival, node.window_open);
        double s = soc - inst.edges.energy(prev.node, j) / B;
        if (node.kind == NodeKind::Charger) {
          const double p = charging_power_kw(std::clamp(s, 0.0, 1.0));
          s += std::min(p * node.service_time / 3600.0 / B, 1.0 - s);
        }
        if (std::abs(arrival - st.arrival) > 1e-6 || std::abs(start - st.service_start) > 1e-6)
          err << at << "timing differs from recomputation; ";
        if (std::abs(s - st.soc) > 1e-9) err << at << "soc differs from recomputation; ";
        clock = start + node.service_time;
        soc = s;
      }
      if (j == 0 && t + 1 != route.size()) err << at << "depot inside a route; ";
    }
    if (!onboard.empty()) err << "route " << k << " ends with passengers onboard; ";
    if (route.size() > 1 && route.back().node != 0) err << "route " << k << " does not end at the depot; ";
  }
  if (sol.routes.size() > static_cast<std::size_t>(inst.fleet.vehicles))
    err << "more routes than vehicles; ";
  if (served != sol.served) err << "served count mismatch; ";
  return err.str();
}

}  // namespace edarp::testing
