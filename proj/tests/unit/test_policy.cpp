#include <cmath>
#include <numeric>

#include "doctest.h"
#include "edarp/error.hpp"
#include "edarp/greedy.hpp"
#include "edarp/policy.hpp"
#include "grad_suites.hpp"
#include "route_check.hpp"

using namespace edarp;
using ad::Matrix;

namespace {
PolicyConfig small_config(int d = 16, int heads = 2, int layers = 2) {
  PolicyConfig cfg;
  cfg.d_h = d;
  cfg.heads = heads;
  cfg.layers = layers;
  return cfg;
}

Instance make(int n, std::uint64_t seed) {
  GeneratorConfig g;
  g.requests = n;
  g.seed = seed;
  return generate_instance(g);
}

FeatureTensors permuted(const FeatureTensors& f, const std::vector<int>& order) {
  // Node k of the result is node order[k] of the input.
  FeatureTensors out = f;
  const int n = f.nodes;
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < kNodeFeatureDim; ++c)
      out.node_features[k * kNodeFeatureDim + c] = f.node(order[k], c);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < kEdgeFeatureDim; ++c)
        out.edge_features[(a * n + b) * kEdgeFeatureDim + c] = f.edge(order[a], order[b], c);
  return out;
}
}  // namespace

TEST_CASE("layout and initialization") {
  const PolicyConfig cfg = small_config(8, 2, 1);
  const Policy p(cfg, 3);
  const auto layout = Policy::layout(cfg);
  REQUIRE(p.params().size() == static_cast<int>(layout.size()));
  CHECK(layout.front().first == "embed.W");
  CHECK(layout.front().second == std::make_pair(kEdgeInputDim, 8));
  const double bound = 1.0 / std::sqrt(8.0);
  for (int i = 0; i < p.params().size(); ++i) {
    const std::string& name = p.params().name(i);
    const Matrix& m = p.params().value(i);
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (name.ends_with(".gain")) CHECK(m[k] == 1.0);
      else if (name.ends_with("ln1.bias") || name.ends_with("ln2.bias")) CHECK(m[k] == 0.0);
      else CHECK(std::abs(m[k]) <= bound);
    }
  }
  CHECK(p.params().index_of("layer0.ff.W1") >= 0);
  CHECK(p.params().value(p.params().index_of("layer0.ff.W1")).cols() == 16);
  CHECK(Policy(cfg, 3).params() == p.params());
  CHECK(!(Policy(cfg, 4).params() == p.params()));
}

TEST_CASE("config validation") {
  PolicyConfig cfg = small_config();
  cfg.heads = 3;
  CHECK_THROWS_AS(validate(cfg), UsageError);
  cfg = small_config();
  cfg.kappa = 0.0;
  CHECK_THROWS_AS(validate(cfg), UsageError);
  cfg = small_config();
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(validate(cfg), UsageError);
}

TEST_CASE("encoder is permutation equivariant") {
  const Policy p(small_config(8, 2, 2), 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FeatureTensors f = normalize_features(make(3, seed));
    std::vector<int> order(f.nodes);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = f.nodes - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, 0, i)]);
    ad::Tape t(&p.params(), false);
    const Matrix z = encode_nodes(t, p, f).value();
    const Matrix zp = encode_nodes(t, p, permuted(f, order)).value();
    for (int k = 0; k < f.nodes; ++k)
      for (int c = 0; c < z.cols(); ++c) CHECK(zp(k, c) == doctest::Approx(z(order[k], c)).epsilon(1e-9));
  }
}

TEST_CASE("decode distribution: sums to one, exact zeros where masked") {
  const Policy p(small_config(), 2);
  Rng rng(8);
  int states = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = make(2 + static_cast<int>(seed % 4), seed);
    const Environment env(inst);
    FleetEpisodeState s = env.reset();
    while (!s.terminal) {
      const FeasibilityMask m = env.feasibility_mask(s);
      const auto probs = action_probabilities(p, inst, s, m);
      double total = 0.0;
      for (int j = 0; j < env.node_count(); ++j) {
        if (!m.allowed[j]) CHECK(probs[j] == 0.0);
        total += probs[j];
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
      ++states;
      std::vector<int> options;
      for (int j = 0; j < env.node_count(); ++j)
        if (m.allowed[j]) options.push_back(j);
      env.apply(s, options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)]);
    }
  }
  CHECK(states > 50);
}

TEST_CASE("energy penalty and tanh clipping") {
  // With every projection zero the raw score is -lambda * eps / B alone.
  PolicyConfig cfg = small_config(4, 1, 0);
  cfg.kappa = 10.0;
  Policy p(cfg, 1);
  for (int i = 0; i < p.params().size(); ++i) {
    Matrix& m = p.params().value(i);
    std::fill(m.values().begin(), m.values().end(), 0.0);
  }
  const Instance inst = make(3, 5);
  const double B = inst.fleet.battery_kwh;
  // Raw score -10 on pickup 1.
  p = Policy([&] { PolicyConfig c = cfg; c.lambda = 10.0 * B / inst.edges.energy(0, 1); return c; }(),
             p.params());
  const double lambda = p.config().lambda;
  const Environment env(inst);
  const FleetEpisodeState s = env.reset();
  const FeasibilityMask m = env.feasibility_mask(s);
  const auto probs = action_probabilities(p, inst, s, m);
  auto clipped = [&](int j) {
    const double u = -lambda * inst.edges.energy(0, j) / B;
    return 10.0 * std::tanh(u / 10.0);
  };
  CHECK(clipped(1) == doctest::Approx(-7.6159).epsilon(1e-4));
  double z = 0.0;
  for (int j = 0; j < inst.node_count(); ++j)
    if (m.allowed[j]) z += std::exp(clipped(j));
  for (int j = 0; j < inst.node_count(); ++j)
    if (m.allowed[j]) CHECK(probs[j] == doctest::Approx(std::exp(clipped(j)) / z).epsilon(1e-12));
}

TEST_CASE("rollouts") {
  const Policy p(small_config(), 7);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = make(3 + static_cast<int>(seed % 3), seed);
    const RolloutResult g1 = rollout(p, inst, {});
    const RolloutResult g2 = rollout(p, inst, {});
    CHECK(g1.actions == g2.actions);
    CHECK(g1.solution.actions() == g1.actions);
    CHECK(testing::audit_solution(inst, g1.solution, testing::Audit::Exact) == "");
    CHECK(g1.log_prob <= 0.0);

    RolloutOptions opt;
    opt.mode = DecodeMode::Sample;
    opt.seed = seed;
    const RolloutResult s1 = rollout(p, inst, opt);
    CHECK(s1.actions == rollout(p, inst, opt).actions);
    CHECK(replay_actions(inst, s1.actions).cost.reward == s1.solution.cost.reward);

    opt.forced_actions = {2};
    CHECK(rollout(p, inst, opt).actions.front() == 2);
    opt.forced_actions = {inst.delivery_of(0)};
    CHECK_THROWS_AS(rollout(p, inst, opt), UsageError);
  }
}

TEST_CASE("greedy decoding follows the argmax") {
  const Policy p(small_config(), 9);
  const Instance inst = make(4, 3);
  const RolloutResult r = rollout(p, inst, {});
  const Environment env(inst);
  FleetEpisodeState s = env.reset();
  for (int a : r.actions) {
    const FeasibilityMask m = env.feasibility_mask(s);
    const auto probs = action_probabilities(p, inst, s, m);
    const int best = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    CHECK(a == best);
    env.apply(s, a);
  }
}

TEST_CASE("step ladder still flags a wrong gradient") {
  // |x| has a kink 3e-7 away; the small steps see the true slope.
  double x = 3e-7;
  auto f = [&]() { return std::abs(x); };
  CHECK(testing::check_entry(f, x, 1.0).error < 1e-6);
  CHECK(x == 3e-7);
  CHECK(testing::check_entry(f, x, 0.0).error > 0.5);
  CHECK(testing::check_entry(f, x, 1.01).error > 1e-3);
  double y = 2.0;
  auto sq = [&]() { return y * y; };
  CHECK(testing::check_entry(sq, y, 4.0).error < 1e-8);
  CHECK(testing::check_entry(sq, y, 4.001).error > 1e-4);
}

TEST_CASE("log-probability gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CAPTURE(seed);
    CHECK(testing::policy_logp_gradient_error(small_config(8, 2, 1), make(2, seed), seed, 4).error < 1e-4);
  }
}
