#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "commands.hpp"
#include "common.hpp"
#include "edarp/error.hpp"
#include "edarp/greedy.hpp"
#include "edarp/policy.hpp"
#include "edarp/rng.hpp"

namespace edarp::cli {

namespace {
struct EvalOptions {
  std::string checkpoint;
  std::string instances;
  std::string out;
  std::string solver = "neural";
  std::string mode = "static";
  double scale = 0.0;
  int replicas = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
};

using Chooser = std::function<int(const FleetEpisodeState&, const FeasibilityMask&)>;

// Drives one episode under realized noise.
//   static: one deterministic plan for the whole fleet, followed while it stays feasible.
//   replan: each vehicle's route is planned at dispatch from the realized state.
//   closed: every decision is taken on the realized state.
// Planned nodes the realized mask rejects are skipped; a vehicle whose plan runs
// out before it returns to the depot is finished with the chooser.
class Simulator {
 public:
  Simulator(const Environment& env, Chooser choose) : env_(env), choose_(std::move(choose)) {}

  Solution run(const std::string& mode, NoiseSampler& noise) const {
    FleetEpisodeState s = env_.reset();
    if (mode == "closed") {
      while (!s.terminal) env_.apply(s, choose_(s, env_.feasibility_mask(s)), &noise);
    } else if (mode == "static") {
      FleetEpisodeState d = env_.reset(false);
      std::vector<std::vector<int>> plan;
      while (!d.terminal) plan.push_back(plan_vehicle(d));
      for (const auto& route : plan) {
        if (s.terminal) break;
        execute(s, route, noise);
      }
      while (!s.terminal) finish_vehicle(s, noise);
    } else {
      while (!s.terminal) {
        FleetEpisodeState d = s;
        d.record_routes = false;
        execute(s, plan_vehicle(d), noise);
      }
    }
    return make_solution(env_.instance(), s);
  }

 private:
  // Deterministic decisions until the current vehicle returns to the depot.
  std::vector<int> plan_vehicle(FleetEpisodeState& d) const {
    std::vector<int> route;
    while (!d.terminal) {
      const int a = choose_(d, env_.feasibility_mask(d));
      route.push_back(a);
      if (env_.apply(d, a).vehicle_reset) break;
    }
    return route;
  }

  void finish_vehicle(FleetEpisodeState& s, NoiseSampler& noise) const {
    while (!s.terminal)
      if (env_.apply(s, choose_(s, env_.feasibility_mask(s)), &noise).vehicle_reset) return;
  }

  void execute(FleetEpisodeState& s, const std::vector<int>& route, NoiseSampler& noise) const {
    for (int a : route) {
      if (s.terminal) return;
      if (!env_.feasibility_mask(s).allowed[a]) continue;
      const StepInfo info = env_.apply(s, a, &noise);
      if (info.vehicle_reset || info.terminal) return;
    }
    finish_vehicle(s, noise);
  }

  const Environment& env_;
  Chooser choose_;
};

struct Outcome {
  Solution solution;
  std::uint64_t noise_seed = 0;
  double wall_s = 0.0;
};

const std::vector<std::string> kAggregateMetrics = {
    "reward", "objective", "completion_pct", "vehicles", "load_factor", "charge_visits",
    "energy_per_vehicle_kwh", "wait_s", "late_s", "travel_s", "fallback_steps"};

std::vector<double> aggregate_values(const Solution& s, const MetricsRow& r) {
  return {r.reward,
          r.objective,
          r.completion_pct,
          static_cast<double>(r.vehicles),
          r.load_factor,
          static_cast<double>(r.charge_visits),
          r.energy_per_vehicle_kwh,
          r.wait_s,
          r.late_s,
          s.cost.travel_s,
          static_cast<double>(s.metrics.fallback_steps)};
}

void run_eval(const EvalOptions& o, const Context& ctx) {
  if (o.solver == "neural" && o.checkpoint.empty())
    throw UsageError("the neural solver needs --checkpoint");
  if (o.scale < 0.0) throw UsageError("--stochastic must be >= 0");
  if (o.replicas < 1) throw UsageError("--replicas must be >= 1");
  if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
  if (!fs::is_directory(o.instances)) throw DataError("not a directory: " + o.instances);
  const auto files = instance_files(o.instances);
  if (files.empty()) throw DataError("no instance files in " + o.instances);
  const fs::path dir(o.out);
  ensure_directory(dir);

  Manifest m("eval", ctx.argv);
  m.seed(o.seed);
  m.config({{"solver", o.solver},
            {"mode", o.mode},
            {"stochastic", o.scale},
            {"replicas", o.replicas},
            {"jobs", o.jobs}});
  std::optional<Policy> policy;
  if (o.solver == "neural") {
    policy.emplace(policy_from_checkpoint(read_checkpoint_file(o.checkpoint)));
    m.input(o.checkpoint);
  }
  std::vector<Instance> instances;
  for (const auto& f : files) {
    instances.push_back(read_instance_file(f.string()));
    require_valid(instances.back());
    m.input(f);
  }

  const int count = static_cast<int>(instances.size());
  std::vector<Outcome> outcomes(static_cast<std::size_t>(count) * o.replicas);
  parallel_for(count, o.jobs, [&](int i) {
    const Instance& inst = instances[i];
    const Environment env(inst);
    Chooser choose;
    std::optional<ad::Tape> tape;
    Encoded enc;
    if (policy) {
      tape.emplace(&policy->params(), false);
      enc = encode(*tape, *policy, normalize_features(inst));
      choose = [&](const FleetEpisodeState& s, const FeasibilityMask& mask) {
        const ad::Matrix p = decode_step(*tape, *policy, enc, inst, s, mask).value();
        int best = -1;
        for (int j = 0; j < env.node_count(); ++j)
          if (mask.allowed[j] && (best < 0 || p[j] > p[best])) best = j;
        return best;
      };
    } else {
      choose = [&](const FleetEpisodeState& s, const FeasibilityMask& mask) {
        return greedy_action(env, s, mask);
      };
    }
    const Simulator sim(env, choose);
    for (int r = 0; r < o.replicas; ++r) {
      Outcome& out = outcomes[static_cast<std::size_t>(i) * o.replicas + r];
      out.noise_seed = derive_seed(o.seed, "eval.noise", static_cast<std::uint64_t>(i) * o.replicas + r);
      NoiseSampler noise({o.scale > 0.0, o.scale, out.noise_seed});
      const auto t0 = std::chrono::steady_clock::now();
      out.solution = sim.run(o.mode, noise);
      out.wall_s = seconds_since(t0);
    }
  });

  std::vector<MetricsRow> rows;
  std::vector<std::vector<double>> columns(kAggregateMetrics.size());
  for (int i = 0; i < count; ++i) {
    for (int r = 0; r < o.replicas; ++r) {
      const Outcome& out = outcomes[static_cast<std::size_t>(i) * o.replicas + r];
      rows.push_back(metrics_row(files[i].stem().string(), o.solver, out.noise_seed, out.solution,
                                 out.wall_s));
      const auto values = aggregate_values(out.solution, rows.back());
      for (std::size_t k = 0; k < values.size(); ++k) columns[k].push_back(values[k]);
    }
  }
  const fs::path metrics = dir / "metrics.csv";
  if (fs::exists(metrics)) fs::remove(metrics);
  append_metrics_csv(metrics, rows);
  m.output(metrics);

  std::ostringstream agg;
  agg.precision(17);
  agg << "solver,mode,stochastic,instances,replicas";
  for (const auto& name : kAggregateMetrics) agg << ',' << name << "_mean," << name << "_std";
  agg << '\n' << o.solver << ',' << o.mode << ',' << o.scale << ',' << count << ',' << o.replicas;
  for (const auto& col : columns) {
    const MeanStd ms = mean_std(col);
    agg << ',' << ms.mean << ',' << ms.std;
  }
  agg << '\n';
  write_text(dir / "aggregate.csv", agg.str());
  m.output(dir / "aggregate.csv");
  m.write(dir / "eval.manifest.json");

  const MeanStd reward = mean_std(columns[0]);
  const MeanStd completion = mean_std(columns[2]);
  std::printf("%d instance(s) x %d replica(s): reward %.4f +- %.4f, completion %.2f%% +- %.2f\n",
              count, o.replicas, reward.mean, reward.std, completion.mean, completion.std);
}
}  // namespace

void add_eval(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<EvalOptions>();
  CLI::App* sub = app.add_subcommand("eval", "Evaluate a policy under deterministic or noisy travel");
  sub->add_option("-i,--instances", o->instances, "Instance directory")->required();
  sub->add_option("-o,--out", o->out, "Output directory")->required();
  sub->add_option("--checkpoint", o->checkpoint, "Policy checkpoint (neural)");
  sub->add_option("--solver", o->solver, "neural or greedy")
      ->check(CLI::IsMember({"neural", "greedy"}))
      ->capture_default_str();
  sub->add_option("--mode", o->mode, "static, replan or closed")
      ->check(CLI::IsMember({"static", "replan", "closed"}))
      ->capture_default_str();
  sub->add_option("--stochastic", o->scale, "Half-normal noise scale (0: deterministic)")
      ->capture_default_str();
  sub->add_option("--replicas", o->replicas, "Noise draws per instance")->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("-j,--jobs", o->jobs, "Instances evaluated in parallel")->capture_default_str();
  sub->callback([o, &ctx] { ctx.run = [o, &ctx] { run_eval(*o, ctx); }; });
}

}  // namespace edarp::cli
