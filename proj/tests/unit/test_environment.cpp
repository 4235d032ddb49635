#include <cmath>

#include "doctest.h"
#include "edarp/environment.hpp"
#include "edarp/rng.hpp"
#include "route_check.hpp"

using namespace edarp;

namespace {
Instance make(int n, std::uint64_t seed, int vehicles = 2, int capacity = 3) {
  GeneratorConfig g;
  g.requests = n;
  g.seed = seed;
  g.fleet.vehicles = vehicles;
  g.fleet.capacity = capacity;
  return generate_instance(g);
}

// Uniformly random legal episode.
Solution random_rollout(const Instance& inst, Rng& rng, NoiseSampler* noise = nullptr) {
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  while (!s.terminal) {
    const FeasibilityMask mask = env.feasibility_mask(s);
    REQUIRE(mask.any());
    std::vector<int> options;
    for (int j = 0; j < env.node_count(); ++j)
      if (mask.allowed[j]) options.push_back(j);
    env.apply(s, options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)], noise);
  }
  return make_solution(inst, s);
}
}  // namespace

TEST_CASE("charging power curve") {
  CHECK(charging_power_kw(0.30) == 100.0);
  CHECK(charging_power_kw(0.70) == doctest::Approx(65.0).epsilon(1e-12));
  CHECK(charging_power_kw(0.97) == 30.0);
  CHECK(charging_power_kw(0.45) == 100.0);
  CHECK(std::abs(charging_power_kw(0.95) - 30.0) <= 1e-9);
  CHECK(std::abs(charging_power_kw(std::nextafter(0.45, 0.0)) - charging_power_kw(0.45)) <= 1e-9);
  CHECK(std::abs(charging_power_kw(std::nextafter(0.95, 1.0)) - charging_power_kw(0.95)) <= 1e-9);
  CHECK_THROWS_AS(charging_power_kw(-0.01), UsageError);
  CHECK_THROWS_AS(charging_power_kw(1.01), UsageError);
}

TEST_CASE("sample_noise") {
  CHECK(sample_noise(5.0, 0.1, 0.0) == 5.0);
  CHECK(sample_noise(5.0, 0.1, -2.0) == doctest::Approx(6.0));
  CHECK(sample_noise(5.0, 0.1, 2.0) == doctest::Approx(6.0));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) CHECK(sample_noise(3.0, 0.1, standard_normal(rng)) >= 3.0);
}

TEST_CASE("reset") {
  const Instance inst = make(3, 1);
  const Environment env(inst);
  const FleetEpisodeState a = env.reset();
  CHECK(a.vehicle.soc == 1.0);
  CHECK(a.vehicle.load == 0);
  CHECK(a.vehicle.node == 0);
  CHECK(a.vehicle.clock == 0.0);
  CHECK(a.vehicles_used == 1);
  CHECK(a.served == 0);
  REQUIRE(a.routes.size() == 1);
  REQUIRE(a.routes[0].size() == 1);
  CHECK(a.routes[0][0].node == 0);
  CHECK(a == env.reset());
}

TEST_CASE("mask at reset: pickups open, chargers blocked") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = make(4, seed);
    const Environment env(inst);
    const FeasibilityMask m = env.feasibility_mask(env.reset());
    for (int j = 1; j <= 4; ++j) CHECK(m.allowed[j]);
    for (int j = 5; j <= 8; ++j) CHECK(!m.allowed[j]);
    for (int j = 9; j < inst.node_count(); ++j) CHECK(!m.allowed[j]);
    CHECK(!m.fallback);
  }
}

TEST_CASE("mask: full vehicle blocks pickups") {
  const Instance inst = make(4, 2, 2, 1);
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  env.apply(s, 1);
  CHECK(s.vehicle.load == inst.fleet.capacity);
  const FeasibilityMask m = env.feasibility_mask(s);
  for (int j = 2; j <= 4; ++j) CHECK(!m.allowed[j]);
  CHECK(!m.allowed[0]);               // loaded: depot blocked
  for (int j = 9; j < inst.node_count(); ++j) CHECK(!m.allowed[j]);  // loaded: chargers blocked
  CHECK(m.allowed[inst.delivery_of(0)]);
}

TEST_CASE("mask: soc at the reserve blocks every costly move") {
  const Instance inst = make(3, 4);
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  s.vehicle.soc = inst.fleet.soc_reserve;
  const FeasibilityMask m = env.feasibility_mask(s);
  for (int j = 1; j < inst.node_count(); ++j)
    if (inst.edges.energy(0, j) > 0) CHECK(!m.allowed[j]);
}

TEST_CASE("mask: delivery needs its pickup, charger-after-charger blocked") {
  const Instance inst = make(2, 5, 2, 3);
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  CHECK(!env.allowed(s, inst.delivery_of(0)));
  env.apply(s, 1);
  CHECK(env.allowed(s, inst.delivery_of(0)));
  CHECK(!env.allowed(s, inst.delivery_of(1)));
  VehicleState v;
  v.node = inst.node_count() - 1;  // at a charger
  CHECK(!env.vehicle_rules(v, inst.node_count() - 1));
}

TEST_CASE("mask agrees with allowed() and is never empty") {
  Rng rng(17);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance inst = make(1 + static_cast<int>(seed % 5), seed, 1 + static_cast<int>(seed % 3));
    const Environment env(inst);
    FleetEpisodeState s = env.reset();
    while (!s.terminal) {
      const FeasibilityMask m = env.feasibility_mask(s);
      REQUIRE(m.any());
      for (int j = 0; j < env.node_count(); ++j) CHECK(static_cast<bool>(m.allowed[j]) == env.allowed(s, j));
      const auto add = m.additive();
      for (int j = 0; j < env.node_count(); ++j)
        CHECK(add[j] == (m.allowed[j] ? 0.0 : -std::numeric_limits<double>::infinity()));
      std::vector<int> options;
      for (int j = 0; j < env.node_count(); ++j)
        if (m.allowed[j]) options.push_back(j);
      env.apply(s, options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)]);
    }
  }
}

TEST_CASE("charger visit gains the expected SoC") {
  GeneratorConfig g;
  g.requests = 2;
  g.seed = 3;
  g.fleet.battery_kwh = 20.0;
  g.charger_service_s = 900.0;
  const Instance inst = generate_instance(g);
  const Environment env(inst);
  const int c = inst.node_count() - 1;
  VehicleState v;
  v.node = 1;
  v.soc = 0.30 + inst.edges.energy(1, c) / 20.0;
  VehicleState w = v;
  env.move(v, c);
  // 100 kW for 900 s is 25 kWh, more than the room left in a 20 kWh pack.
  CHECK(v.soc == 1.0);

  Instance short_stop = inst;
  short_stop.nodes[c].service_time = 90.0;
  Environment(short_stop).move(w, c);
  CHECK(w.soc == doctest::Approx(0.30 + 0.125).epsilon(1e-12));
}

TEST_CASE("early arrival waits at a pickup") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = make(3, seed);
    const Environment env(inst);
    FleetEpisodeState s = env.reset();
    const StepInfo info = env.apply(s, 1);
    const double arrival = inst.edges.time(0, 1);
    const double a = inst.nodes[1].window_open;
    CHECK(info.incurred.wait_s == doctest::Approx(std::max(0.0, a - arrival)));
    CHECK(s.routes[0][1].service_start == std::max(arrival, a));
    CHECK(s.vehicle.clock == std::max(arrival, a) + inst.nodes[1].service_time);
    CHECK(info.incurred.travel_s == inst.edges.time(0, 1));
  }
}

TEST_CASE("depot transitions") {
  SUBCASE("all served: terminal") {
    const Instance inst = make(1, 2, 1);
    const Environment env(inst);
    FleetEpisodeState s = env.reset();
    env.apply(s, 1);
    env.apply(s, 2);
    const StepInfo info = env.apply(s, 0);
    CHECK(info.terminal);
    CHECK(s.terminal);
    CHECK_THROWS_AS(env.apply(s, 0), ContractViolation);
  }
  SUBCASE("unserved with spare vehicle: reset") {
    const Instance inst = make(2, 2, 2);
    const Environment env(inst);
    FleetEpisodeState s = env.reset();
    env.apply(s, 1);
    env.apply(s, 3);
    const StepInfo info = env.apply(s, 0);
    CHECK(info.vehicle_reset);
    CHECK(!s.terminal);
    CHECK(s.vehicles_used == 2);
    CHECK(s.vehicle.soc == 1.0);
    CHECK(s.vehicle.clock == 0.0);
    env.apply(s, 0);
    CHECK(s.terminal);
  }
}

TEST_CASE("blocked actions are contract violations") {
  const Instance inst = make(2, 8);
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  CHECK_THROWS_AS(env.apply(s, inst.delivery_of(0)), ContractViolation);
  CHECK_THROWS_AS(env.apply(s, inst.node_count()), ContractViolation);
  CHECK_THROWS_AS(env.apply(s, -1), ContractViolation);
}

TEST_CASE("random rollouts satisfy an independent audit") {
  Rng rng(99);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Instance inst =
        make(1 + static_cast<int>(seed % 7), seed, 1 + static_cast<int>(seed % 3), 1 + static_cast<int>(seed % 3));
    const Solution sol = random_rollout(inst, rng);
    INFO("seed " << seed);
    CHECK(testing::audit_solution(inst, sol, testing::Audit::Exact) == "");
    CHECK(sol.metrics.fallback_steps == 0);
    CHECK(sol.cost.reward + sol.cost.objective - inst.weights.complete * sol.served == doctest::Approx(0.0).epsilon(1e-12));
    // Replay reproduces the log bit for bit.
    const Solution back = replay_actions(inst, sol.actions());
    CHECK(back.routes == sol.routes);
    CHECK(back.cost.reward == sol.cost.reward);
    const ScoreResult sc = score_solution(sol, inst);
    CHECK(sc.reward == sol.cost.reward);
  }
}

TEST_CASE("noisy rollouts never undercut deterministic edges") {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Instance inst = make(1 + static_cast<int>(seed % 6), seed);
    const Environment env(inst);
    NoiseSampler noise({true, 0.1, seed});
    FleetEpisodeState s = env.reset();
    while (!s.terminal) {
      const FeasibilityMask m = env.feasibility_mask(s);
      REQUIRE(m.any());
      std::vector<int> options;
      for (int j = 0; j < env.node_count(); ++j)
        if (m.allowed[j]) options.push_back(j);
      const int a = options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)];
      const int from = s.vehicle.node;
      const StepInfo info = env.apply(s, a, &noise);
      CHECK(info.incurred.travel_s >= inst.edges.time(from, a));
      CHECK(info.incurred.energy_kwh >= inst.edges.energy(from, a));
    }
    CHECK(testing::audit_solution(inst, make_solution(inst, s), testing::Audit::Structural) == "");
  }
}

TEST_CASE("disabled noise matches the deterministic step") {
  const Instance inst = make(3, 12);
  const Environment env(inst);
  NoiseSampler off({false, 0.1, 3});
  NoiseSampler zero({true, 0.0, 3});
  FleetEpisodeState a = env.reset(), b = env.reset(), c = env.reset();
  for (int act : {1, 4, 0}) {
    env.apply(a, act);
    env.apply(b, act, &off);
    env.apply(c, act, &zero);
  }
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("replay errors name the step") {
  const Instance inst = make(2, 1);
  try {
    replay_actions(inst, {1, 4, 0});
    FAIL("expected ReplayError");
  } catch (const ReplayError& e) {
    CHECK(e.step() == 1);
    CHECK(e.node() == 4);
  }
  CHECK_THROWS_AS(replay_actions(inst, {1}), ReplayError);
  CHECK_THROWS_AS(replay_actions(inst, {0, 0, 1}), ReplayError);
}

TEST_CASE("replay_routes pads unused vehicles") {
  const Instance inst = make(2, 1, 3);
  const Solution sol = replay_routes(inst, {{1, 3}});
  CHECK(sol.served == 1);
  CHECK(sol.metrics.vehicles_used == 1);
  const Solution both = replay_routes(inst, {{1, 3}, {2, 4}});
  CHECK(both.served == 2);
  CHECK(both.metrics.completion_rate == 1.0);
}

TEST_CASE("no requests: immediate terminal with zero cost") {
  Instance inst = make(1, 1);
  // Strip the request: depot plus chargers only.
  Instance empty;
  empty.fleet = inst.fleet;
  empty.weights = inst.weights;
  empty.horizon = inst.horizon;
  const int keep[] = {0, 3};
  for (int i : keep) empty.nodes.push_back(inst.nodes[i]);
  empty.nodes[1].id = 1;
  for (SquareMatrix* m : {&empty.edges.time, &empty.edges.distance, &empty.edges.energy}) *m = SquareMatrix(2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      empty.edges.time(a, b) = inst.edges.time(keep[a], keep[b]);
      empty.edges.distance(a, b) = inst.edges.distance(keep[a], keep[b]);
      empty.edges.energy(a, b) = inst.edges.energy(keep[a], keep[b]);
    }
  REQUIRE(validate(empty).empty());
  const Solution sol = replay_actions(empty, {0});
  CHECK(sol.cost.objective == 0.0);
  CHECK(sol.cost.reward == 0.0);
}

TEST_CASE("zero costs: reward equals served count") {
  GeneratorConfig g;
  g.requests = 2;
  g.seed = 21;
  g.weights = {0.0, 0.0, 0.0, 1.0, 0.0, 60.0};
  const Instance inst = generate_instance(g);
  const Solution sol = replay_routes(inst, {{1, 3}, {2, 4}});
  CHECK(sol.served == 2);
  CHECK(sol.cost.reward == 2.0);
}

TEST_CASE("metrics") {
  const Instance inst = make(2, 31, 2, 3);
  const Solution sol = replay_routes(inst, {{1, 3}, {2, 4}});
  CHECK(sol.metrics.load_factor == 1.0);
  CHECK(sol.metrics.vehicles_used == 2);
  CHECK(sol.metrics.charge_visits == 0);
  CHECK(sol.metrics.energy_per_vehicle_kwh == doctest::Approx(sol.cost.energy_kwh / 2));
  CHECK(sol.metrics.wait_per_request_s == doctest::Approx(sol.cost.wait_s / 2));
}
