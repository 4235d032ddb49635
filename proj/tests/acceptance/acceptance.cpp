// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: edarp_acceptance [criterion ids...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edarp/alns.hpp"
#include "edarp/environment.hpp"
#include "edarp/greedy.hpp"
#include "edarp/oracle.hpp"
#include "edarp/policy.hpp"
#include "edarp/training.hpp"
#include "enumerate.hpp"
#include "grad_suites.hpp"
#include "route_check.hpp"

using namespace edarp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Instance make(int n, int vehicles, int capacity, std::uint64_t seed) {
  GeneratorConfig g;
  g.requests = n;
  g.fleet.vehicles = vehicles;
  g.fleet.capacity = capacity;
  g.max_group_size = std::min(2, capacity);
  g.seed = seed;
  return generate_instance(g);
}

Outcome charging_curve() {
  const double p30 = charging_power_kw(0.30), p70 = charging_power_kw(0.70);
  const double p97 = charging_power_kw(0.97);
  const double d = 1e-12;
  const double jump45 = std::abs(charging_power_kw(0.45 - d) - charging_power_kw(0.45));
  const double jump95 = std::abs(charging_power_kw(0.95) - charging_power_kw(0.95 + d));
  const double err = std::max({std::abs(p30 - 100.0), std::abs(p70 - 65.0), std::abs(p97 - 30.0)});
  return {err <= 1e-9 && jump45 <= 1e-9 && jump95 <= 1e-9,
          fmt("P(0.30,0.70,0.97)=(%.9g,%.9g,%.9g) kW, jumps at 0.45/0.95 = %.2g/%.2g", p30, p70,
              p97, jump45, jump95)};
}

Outcome mask_fuzz() {
  const int sizes[] = {2, 5, 10};
  int violations = 0, rollouts = 0;
  std::string first;
  for (int i = 0; i < 10000; ++i) {
    const Instance inst = make(sizes[i % 3], 1 + (i / 3) % 3, 1 + (i / 9) % 3, 50000 + i);
    const Environment env(inst);
    Rng rng = make_rng(i, "acceptance.fuzz");
    FleetEpisodeState s = env.reset();
    while (!s.terminal) {
      std::vector<int> options;
      for (int j = 0; j < env.node_count(); ++j)
        if (env.allowed(s, j)) options.push_back(j);
      env.apply(s, options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)]);
    }
    const std::string err =
        testing::audit_solution(inst, make_solution(inst, s), testing::Audit::Exact);
    ++rollouts;
    if (!err.empty()) {
      ++violations;
      if (first.empty()) first = " first: " + err;
    }
  }
  return {violations == 0, fmt("%d rollouts, %d with violations", rollouts, violations) + first};
}

Outcome oracle_equivalence() {
  int mismatches = 0, replay_bad = 0;
  for (int i = 0; i < 100; ++i) {
    const Instance inst = make(1 + i % 2, 1 + (i / 2) % 2, 3, 70000 + i);
    const ExactResult r = exact_solve(inst);
    const testing::Enumeration e = testing::enumerate_all(inst);
    if (!r.optimal || r.solution.cost.reward != e.best) ++mismatches;
    if (std::abs(score_solution(r.solution, inst).reward - r.solution.cost.reward) > 1e-9) ++replay_bad;
  }
  return {mismatches == 0 && replay_bad == 0,
          fmt("100 instances, %d reward mismatches, %d replay mismatches", mismatches, replay_bad)};
}

Outcome heuristic_ordering() {
  int wins = 0;
  bool monotone = true;
  double alns_sum = 0.0, greedy_sum = 0.0;
  for (int i = 0; i < 30; ++i) {
    const Instance inst = make(10, 2, 3, 80000 + i);
    AlnsConfig cfg;
    cfg.max_iterations = 10000;
    cfg.seed = i;
    const AlnsResult r = alns_solve(inst, cfg);
    const double a = r.best.cost.reward, g = greedy_solve(inst).cost.reward;
    if (a >= g) ++wins;
    alns_sum += a;
    greedy_sum += g;
    for (std::size_t k = 1; k < r.best_history.size(); ++k)
      if (r.best_history[k] > r.best_history[k - 1]) monotone = false;
  }
  return {wins >= 27 && alns_sum >= greedy_sum && monotone,
          fmt("ALNS >= greedy on %d/30, mean %.4f vs %.4f, best-so-far monotone: %s", wins,
              alns_sum / 30, greedy_sum / 30, monotone ? "yes" : "no")};
}

Outcome weight_arithmetic() {
  AlnsConfig cfg;
  DestroyWeights w;
  w.score[0] = cfg.sigma_best;
  w.uses[0] = 1;
  update_weights(w, cfg);
  const bool weight_ok = w.weight[0] == 2.8;

  const Instance inst = make(8, 2, 3, 90001);
  cfg.max_iterations = 2000;
  cfg.record_telemetry = true;
  const AlnsResult r = alns_solve(inst, cfg);
  const double j0 = r.initial.cost.objective - inst.weights.complete * r.initial.served;
  double worst = 0.0;
  for (const auto& row : r.telemetry) {
    const double expect = 0.05 * std::abs(j0) * std::pow(0.99, row.iteration);
    worst = std::max(worst, std::abs(row.tolerance - expect));
  }
  return {weight_ok && worst <= 1e-12 && r.telemetry.size() == 2000,
          fmt("updated weight %.17g, max RTR tolerance error %.3g over %zu iterations", w.weight[0],
              worst, r.telemetry.size())};
}

Outcome gradient_checks() {
  double prim = 0.0, composed = 0.0, step = 0.0;
  std::string worst_name;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& g : testing::primitive_gradient_errors(seed))
      if (g.error > prim) {
        prim = g.error;
        worst_name = g.name;
      }
    PolicyConfig cfg;
    cfg.d_h = seed % 2 ? 32 : 16;
    cfg.heads = 4;
    cfg.layers = 2;
    const Instance inst = make(2 + static_cast<int>(seed % 2), 2, 3, 91000 + seed);
    const testing::StepLadderCheck c = testing::policy_logp_gradient_error(cfg, inst, seed, 3);
    if (c.error > composed) {
      composed = c.error;
      step = c.step;
    }
  }
  return {prim <= 1e-4 && composed <= 1e-4,
          fmt("max relative error: primitives %.3g (%s), encoder-decoder log-prob %.3g (h=%.0e)",
              prim, worst_name.c_str(), composed, step)};
}

Outcome distribution_contract() {
  PolicyConfig cfg;
  cfg.d_h = 16;
  cfg.heads = 4;
  cfg.layers = 2;
  const Policy p(cfg, 17);
  int states = 0, bad_sum = 0, bad_zero = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; states < 1000; ++seed) {
    const Instance inst = make(2 + static_cast<int>(seed % 5), 2, 3, 92000 + seed);
    const Environment env(inst);
    Rng rng = make_rng(seed, "acceptance.states");
    FleetEpisodeState s = env.reset(false);
    while (!s.terminal && states < 1000) {
      const FeasibilityMask m = env.feasibility_mask(s);
      const auto probs = action_probabilities(p, inst, s, m);
      double total = 0.0;
      for (int j = 0; j < env.node_count(); ++j) {
        total += probs[j];
        if (!m.allowed[j] && probs[j] != 0.0) ++bad_zero;
      }
      worst = std::max(worst, std::abs(total - 1.0));
      if (std::abs(total - 1.0) > 1e-9) ++bad_sum;
      ++states;
      std::vector<int> options;
      for (int j = 0; j < env.node_count(); ++j)
        if (m.allowed[j]) options.push_back(j);
      env.apply(s, options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)]);
    }
  }
  return {bad_sum == 0 && bad_zero == 0,
          fmt("%d states, max |sum-1| %.3g, nonzero masked entries %d", states, worst, bad_zero)};
}

Outcome pomo_identity() {
  PolicyConfig cfg;
  cfg.d_h = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  const Policy p(cfg, 5);
  GeneratorConfig g;
  double worst = 0.0;
  int groups = 0;
  for (int b = 0; b < 1000; ++b) {
    const auto batch = make_dataset(g, {3, 4, 5}, 4, 93000 + b, "acceptance.pomo");
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const PomoResult r = pomo_instance(p, batch[i], 4, derive_seed(b, "acceptance.pomo", i));
      double total = 0.0;
      for (double a : r.advantages) total += a;
      worst = std::max(worst, std::abs(total));
      ++groups;
    }
  }
  return {worst <= 1e-9, fmt("1000 batches, %d groups, max |sum of advantages| %.3g", groups, worst)};
}

// Desk-scale training on n=4 instances; the validation-best weights are scored.
Outcome learning_signal() {
  GeneratorConfig g;
  const auto train_set = make_dataset(g, {4}, 2000, 1, "acceptance.train");
  const auto val_set = make_dataset(g, {4}, 100, 2, "acceptance.val");

  TrainConfig cfg;
  cfg.policy.d_h = 32;
  cfg.policy.heads = 4;
  cfg.policy.layers = 2;
  cfg.pomo_width = 4;
  cfg.batch_size = 32;
  cfg.epochs = 150;
  cfg.adam.lr = 1e-3;
  cfg.time_limit_s = 1500.0;
  cfg.seed = 3;
  Policy policy(cfg.policy, cfg.seed);
  AdamState opt;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport report = train(policy, opt, cfg, train_set, val_set);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (report.best_epoch >= 0) policy = Policy(cfg.policy, report.best_params);

  const auto held_out = make_dataset(g, {4}, 100, 3, "acceptance.heldout");
  int wins = 0;
  for (const auto& inst : held_out)
    if (rollout(policy, inst, {}).solution.cost.reward >= greedy_solve(inst).cost.reward) ++wins;

  const auto small = make_dataset(g, {2, 3}, 100, 4, "acceptance.gap");
  double gap = 0.0;
  for (const auto& inst : small) {
    const double best = exact_solve(inst).solution.cost.reward;
    const double range = best - testing::enumerate_all(inst).worst;
    if (range > 0.0) gap += (best - rollout(policy, inst, {}).solution.cost.reward) / range;
  }
  gap /= static_cast<double>(small.size());
  return {wins >= 70 && gap <= 0.10 && seconds <= 1800.0,
          fmt("%zu epochs in %.0f s, best epoch %d, policy >= greedy on %d/100 held-out, mean oracle gap %.2f%% "
              "of reward range on n<=3",
              report.epochs.size(), seconds, report.best_epoch, wins, 100.0 * gap)};
}

Outcome stochastic_model() {
  NoiseConfig cfg;
  cfg.enabled = true;
  cfg.scale = 0.1;
  cfg.seed = 11;
  NoiseSampler sampler(cfg);
  const double base = 37.5;
  int below = 0;
  double inflation = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) {
    const double x = sample_noise(base, cfg.scale, sampler.draw_z());
    if (x < base) ++below;
    inflation += x / base - 1.0;
  }
  inflation /= draws;
  return {below == 0 && inflation >= 0.075 && inflation <= 0.085,
          fmt("%d draws, %d below base, mean inflation %.5f (target %.5f)", draws, below, inflation,
              0.1 * std::sqrt(2.0 / std::acos(-1.0)))};
}

Outcome curriculum() {
  CurriculumConfig cfg;
  cfg.sizes = {8, 10, 12, 14, 17, 21};
  cfg.train_instances = 64;
  cfg.val_instances = 32;
  cfg.train.policy.d_h = 32;
  cfg.train.policy.heads = 4;
  cfg.train.policy.layers = 2;
  cfg.train.pomo_width = 4;
  cfg.train.batch_size = 16;
  cfg.train.epochs = 3;
  cfg.train.adam.lr = 1e-4;
  cfg.train.seed = 21;
  Policy policy(cfg.train.policy, cfg.train.seed);
  const auto stages = run_curriculum(policy, cfg);
  bool ok = stages.size() == cfg.sizes.size();
  std::ostringstream d;
  d << stages.size() << "/" << cfg.sizes.size() << " stages;";
  for (const auto& s : stages) {
    const bool within = s.final_val >= s.zero_shot_val - 0.05 * std::abs(s.zero_shot_val);
    ok = ok && within;
    d << fmt(" n=%d %.3f->%.3f%s", s.requests, s.zero_shot_val, s.final_val, within ? "" : "(!)");
  }
  return {ok, d.str()};
}

Outcome reward_weights() {
  auto mean_load = [](CostWeights w) {
    double total = 0.0;
    for (int i = 0; i < 50; ++i) {
      GeneratorConfig g;
      g.requests = 12;
      g.fleet.vehicles = 4;
      g.fleet.capacity = 3;
      g.weights = w;
      g.seed = 94000 + i;
      AlnsConfig cfg;
      cfg.max_iterations = 2000;
      cfg.seed = i;
      total += alns_solve(generate_instance(g), cfg).best.metrics.load_factor;
    }
    return total / 50.0;
  };
  const double pooled = mean_load({1.0, 0.1, 0.1, 1.0, 0.0, 60.0});
  const double equal = mean_load({1.0, 1.0, 1.0, 1.0, 0.0, 60.0});
  return {pooled > equal,
          fmt("mean load factor (1,0.1,0.1,1) %.4f vs (1,1,1,1) %.4f over 50 instances", pooled, equal)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "charging curve", charging_curve},
      {2, "mask soundness fuzz", mask_fuzz},
      {3, "oracle equivalence", oracle_equivalence},
      {4, "heuristic ordering", heuristic_ordering},
      {5, "ALNS weight arithmetic", weight_arithmetic},
      {6, "gradient checks", gradient_checks},
      {7, "distribution contract", distribution_contract},
      {8, "POMO identity", pomo_identity},
      {9, "learning signal", learning_signal},
      {10, "stochastic model", stochastic_model},
      {11, "curriculum mechanics", curriculum},
      {12, "reward-weight direction", reward_weights},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
