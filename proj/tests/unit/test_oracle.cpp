#include "doctest.h"
#include "edarp/greedy.hpp"
#include "edarp/oracle.hpp"
#include "enumerate.hpp"
#include "route_check.hpp"

using namespace edarp;

namespace {
Instance make(int n, int k, std::uint64_t seed) {
  GeneratorConfig g;
  g.requests = n;
  g.fleet.vehicles = k;
  g.seed = seed;
  return generate_instance(g);
}
}  // namespace

TEST_CASE("single request, single vehicle: depot-pickup-delivery-depot") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorConfig g;
    g.requests = 1;
    g.fleet.vehicles = 1;
    g.seed = seed;
    g.weights.complete = 10.0;
    g.asymmetry = 0.0;
    const Instance inst = generate_instance(g);
    const ExactResult r = exact_solve(inst);
    CHECK(r.optimal);
    CHECK(r.solution.actions() == std::vector<int>{1, 2, 0});
    CHECK(r.solution.metrics.completion_rate == 1.0);

    // At unit weights a long wait can make the trip a loss; then staying home wins.
    const Instance unit = make(1, 1, seed);
    const double serve = replay_actions(unit, {1, 2, 0}).cost.reward;
    const ExactResult u = exact_solve(unit);
    CHECK(u.solution.cost.reward == std::max(0.0, serve));
    CHECK(u.solution.actions() == (serve > 0.0 ? std::vector<int>{1, 2, 0} : std::vector<int>{0}));
  }
}

TEST_CASE("pruned search matches plain enumeration") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = make(1 + static_cast<int>(seed % 3), 1 + static_cast<int>(seed % 2), seed);
    const ExactResult r = exact_solve(inst);
    const testing::Enumeration e = testing::enumerate_all(inst);
    INFO("seed " << seed);
    CHECK(r.optimal);
    CHECK(r.solution.cost.reward == e.best);
    // First strict maximum in lexicographic order, same as the enumerator.
    CHECK(r.solution.actions() == e.best_actions);
    CHECK(score_solution(r.solution, inst).reward == doctest::Approx(r.solution.cost.reward).epsilon(1e-12));
    CHECK(testing::audit_solution(inst, r.solution, testing::Audit::Exact) == "");
    CHECK(r.solution.cost.reward >= greedy_solve(inst).cost.reward);
  }
}

TEST_CASE("exhausted budget reports non-optimal") {
  const Instance inst = make(3, 2, 4);
  const ExactResult r = exact_solve(inst, 5);
  CHECK(!r.optimal);
  CHECK(r.solution.requests == 3);
  CHECK(testing::audit_solution(inst, r.solution, testing::Audit::Exact) == "");
}
