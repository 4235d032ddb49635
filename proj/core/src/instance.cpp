#include "edarp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "edarp/error.hpp"
#include "edarp/rng.hpp"

namespace edarp {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Depot: return "depot";
    case NodeKind::Pickup: return "pickup";
    case NodeKind::Delivery: return "delivery";
    case NodeKind::Charger: return "charger";
  }
  return "unknown";
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "depot") return NodeKind::Depot;
  if (s == "pickup") return NodeKind::Pickup;
  if (s == "delivery") return NodeKind::Delivery;
  if (s == "charger") return NodeKind::Charger;
  throw DataError("unknown node kind '" + std::string(s) + "'");
}

double SquareMatrix::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double SquareMatrix::min() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

Instance generate_instance(const GeneratorConfig& cfg) {
  if (cfg.requests < 1) throw UsageError("generate_instance: request count must be >= 1");
  if (cfg.chargers < 1) throw UsageError("generate_instance: charger count must be >= 1");
  if (cfg.asymmetry < 0) throw UsageError("generate_instance: asymmetry must be >= 0");
  if (cfg.max_group_size < 1 || cfg.max_group_size > cfg.fleet.capacity)
    throw UsageError("generate_instance: max_group_size must lie in [1, capacity]");

  const int n = cfg.requests;
  const int count = 1 + 2 * n + cfg.chargers;
  Rng place = make_rng(cfg.seed, "instance.place");
  Rng edges = make_rng(cfg.seed, "instance.edges");
  Rng windows = make_rng(cfg.seed, "instance.windows");

  Instance inst;
  inst.seed = cfg.seed;
  inst.fleet = cfg.fleet;
  inst.weights = cfg.weights;
  inst.horizon = cfg.horizon_s;
  inst.nodes.resize(count);
  for (int i = 0; i < count; ++i) {
    Node& node = inst.nodes[i];
    node.id = i;
    node.x = uniform01(place) * cfg.area_width_m;
    node.y = uniform01(place) * cfg.area_width_m;
    if (i == 0) {
      node.kind = NodeKind::Depot;
    } else if (i <= n) {
      node.kind = NodeKind::Pickup;
      node.request = i - 1;
    } else if (i <= 2 * n) {
      node.kind = NodeKind::Delivery;
      node.request = i - 1 - n;
    } else {
      node.kind = NodeKind::Charger;
    }
  }

  inst.edges.time = SquareMatrix(count);
  inst.edges.distance = SquareMatrix(count);
  inst.edges.energy = SquareMatrix(count);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      // Draw both perturbations for every ordered pair so the stream layout
      // does not depend on the asymmetry value.
      const double u_road = uniform01(edges) * cfg.asymmetry;
      const double u_energy = uniform01(edges) * cfg.asymmetry;
      if (i == j) continue;
      const double dx = inst.nodes[i].x - inst.nodes[j].x;
      const double dy = inst.nodes[i].y - inst.nodes[j].y;
      const double road = std::hypot(dx, dy) * (1.0 + u_road);
      inst.edges.distance(i, j) = road;
      inst.edges.time(i, j) = road / cfg.speed_mps;
      inst.edges.energy(i, j) = cfg.energy_per_km * road / 1000.0 * (1.0 + u_energy);
    }
  }

  const auto& delta = inst.edges.time;
  const auto& eps = inst.edges.energy;
  const double usable_kwh = (1.0 - cfg.fleet.soc_reserve) * cfg.fleet.battery_kwh;
  for (int j = 0; j < count; ++j) {
    if (eps(j, 0) > usable_kwh)
      throw UsageError("generate_instance: depot unreachable on a full battery from node " +
                       std::to_string(j) + "; shrink the area or enlarge the battery");
  }

  inst.nodes[0].window_open = 0.0;
  inst.nodes[0].window_close = cfg.horizon_s;
  for (int c = 2 * n + 1; c < count; ++c) {
    inst.nodes[c].window_open = 0.0;
    inst.nodes[c].window_close = cfg.horizon_s;
    inst.nodes[c].service_time = cfg.charger_service_s;
  }

  inst.requests.resize(n);
  for (int r = 0; r < n; ++r) {
    const int p = 1 + r;
    const int d = 1 + n + r;
    const double direct = delta(p, d);
    const double lo = delta(0, p);
    const double hi = cfg.horizon_s - cfg.window_width_s - cfg.pickup_service_s - direct -
                      cfg.delivery_slack_s - cfg.delivery_service_s - delta(d, 0);
    if (hi < lo)
      throw UsageError("generate_instance: horizon too short for request " + std::to_string(r));
    if (eps(0, p) + eps(p, d) + eps(d, 0) > usable_kwh)
      throw UsageError("generate_instance: request " + std::to_string(r) +
                       " cannot be served on one battery charge");

    const double open = lo + uniform01(windows) * (hi - lo);
    const int group = uniform_int(windows, 1, cfg.max_group_size);

    Node& pick = inst.nodes[p];
    pick.window_open = open;
    pick.window_close = open + cfg.window_width_s;
    pick.service_time = cfg.pickup_service_s;
    pick.load_delta = group;

    Node& drop = inst.nodes[d];
    drop.window_open = open + direct;
    drop.window_close = pick.window_close + direct + cfg.delivery_slack_s;
    drop.service_time = cfg.delivery_service_s;
    drop.load_delta = -group;

    Request& req = inst.requests[r];
    req.id = r;
    req.pickup = p;
    req.delivery = d;
    req.max_ride_time = cfg.pickup_service_s + cfg.ride_time_factor * direct + cfg.ride_slack_s;
  }
  return inst;
}

namespace {

void check(std::vector<Violation>& out, bool ok, std::string field, int index,
           std::string message) {
  if (!ok) out.push_back({std::move(field), index, std::move(message)});
}

void check_matrix(std::vector<Violation>& out, const SquareMatrix& m, std::size_t expected,
                  const char* name) {
  if (m.size() != expected) {
    out.push_back({name, -1, "matrix dimension " + std::to_string(m.size()) + " != " +
                                 std::to_string(expected)});
    return;
  }
  for (std::size_t i = 0; i < expected; ++i) {
    for (std::size_t j = 0; j < expected; ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        out.push_back({name, static_cast<int>(i),
                       "entry (" + std::to_string(i) + "," + std::to_string(j) +
                           ") must be finite and >= 0"});
      } else if (i == j && v != 0.0) {
        out.push_back({name, static_cast<int>(i), "diagonal entry must be 0"});
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate(const Instance& inst) {
  std::vector<Violation> out;
  const int n = inst.request_count();
  const int count = inst.node_count();

  check(out, inst.horizon > 0.0 && std::isfinite(inst.horizon), "horizon", -1, "must be > 0");
  check(out, inst.fleet.vehicles >= 1, "fleet.vehicles", -1, "K must be >= 1");
  check(out, inst.fleet.capacity >= 1, "fleet.capacity", -1, "Q must be >= 1");
  check(out, inst.fleet.battery_kwh > 0.0, "fleet.battery", -1, "B must be > 0");
  check(out, inst.fleet.soc_reserve >= 0.0 && inst.fleet.soc_reserve < 1.0, "fleet.reserve", -1,
        "rho must lie in [0, 1)");
  const CostWeights& w = inst.weights;
  check(out, w.energy >= 0 && w.wait >= 0 && w.late >= 0 && w.complete >= 0 && w.travel >= 0,
        "weights", -1, "all weights must be >= 0");
  check(out, w.time_unit_s > 0, "weights.time_unit", -1, "must be > 0");

  if (count < 1 + 2 * n) {
    out.push_back({"nodes", -1, "fewer nodes than 1 + 2n"});
    return out;
  }

  int depots = 0;
  for (int i = 0; i < count; ++i) {
    const Node& node = inst.nodes[i];
    if (node.kind == NodeKind::Depot) ++depots;
    check(out, node.id == i, "id", i, "node id must equal its position");

    NodeKind expected = NodeKind::Charger;
    if (i == 0) expected = NodeKind::Depot;
    else if (i <= n) expected = NodeKind::Pickup;
    else if (i <= 2 * n) expected = NodeKind::Delivery;
    check(out, node.kind == expected, "kind", i,
          "expected " + std::string(to_string(expected)) + " at this position");

    check(out, node.window_open <= node.window_close, "window", i, "a > l");
    check(out, node.service_time >= 0.0, "service_time", i, "sigma must be >= 0");
    switch (node.kind) {
      case NodeKind::Pickup:
        check(out, node.load_delta > 0, "load", i, "pickup q must be > 0");
        check(out, node.load_delta <= inst.fleet.capacity, "load", i, "pickup q exceeds Q");
        check(out, node.request == i - 1, "request", i, "pickup request index mismatch");
        break;
      case NodeKind::Delivery: {
        check(out, node.request == i - 1 - n, "request", i, "delivery request index mismatch");
        const int p = i - n;
        check(out, node.load_delta == -inst.nodes[p].load_delta, "load", i,
              "delivery q must equal minus its pickup's q");
        break;
      }
      case NodeKind::Depot:
      case NodeKind::Charger:
        check(out, node.load_delta == 0, "load", i, "q must be 0 at depot/chargers");
        break;
    }
  }
  check(out, depots == 1, "nodes", -1, "exactly one depot required");

  check_matrix(out, inst.edges.time, count, "edges.time");
  check_matrix(out, inst.edges.distance, count, "edges.dist");
  check_matrix(out, inst.edges.energy, count, "edges.energy");

  for (int r = 0; r < n; ++r) {
    const Request& req = inst.requests[r];
    check(out, req.id == r, "request.id", r, "request id must equal its position");
    check(out, req.pickup == 1 + r, "request.pickup", r, "pickup must be node 1 + r");
    check(out, req.delivery == req.pickup + n, "request.delivery", r,
          "delivery must equal pickup + n");
    if (inst.edges.time.size() == static_cast<std::size_t>(count) && req.pickup >= 0 &&
        req.pickup < count && req.delivery >= 0 && req.delivery < count) {
      check(out, req.max_ride_time >= inst.edges.time(req.pickup, req.delivery), "request.maxRide",
            r, "max ride time below direct travel time");
    }
  }
  return out;
}

void require_valid(const Instance& inst) {
  const auto violations = validate(inst);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid instance (" << violations.size() << " violations)";
  for (std::size_t k = 0; k < violations.size() && k < 5; ++k) {
    msg << "; " << violations[k].field << "[" << violations[k].index
        << "]: " << violations[k].message;
  }
  throw DataError(msg.str());
}

}  // namespace edarp
