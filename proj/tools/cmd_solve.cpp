#include <cstdio>
#include <memory>
#include <optional>

#include "commands.hpp"
#include "common.hpp"
#include "edarp/alns.hpp"
#include "edarp/error.hpp"
#include "edarp/greedy.hpp"
#include "edarp/oracle.hpp"
#include "edarp/policy.hpp"
#include "edarp/rng.hpp"
#include "edarp/solution_io.hpp"

namespace edarp::cli {

namespace {
struct SolveOptions {
  std::string instance;
  std::string solver;
  std::string checkpoint;
  std::string out;
  std::string metrics;
  std::uint64_t seed = 0;
  int iterations = 10000;
  double time_limit_s = 0.0;
  std::uint64_t budget = kDefaultOracleBudget;
  int jobs = 1;
};

struct Solved {
  Solution solution;
  double wall_s = 0.0;
  json info = json::object();
};

void run_solve(const SolveOptions& o, const Context& ctx) {
  if (o.solver == "neural" && o.checkpoint.empty())
    throw UsageError("the neural solver needs --checkpoint");
  if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
  const auto files = expand_instances(o.instance);
  const fs::path dir(o.out);
  ensure_directory(dir);

  Manifest m("solve", ctx.argv);
  m.seed(o.seed);
  json cfg = {{"solver", o.solver}, {"jobs", o.jobs}};
  std::optional<Policy> policy;
  AlnsConfig alns;
  if (o.solver == "neural") {
    const Checkpoint ck = read_checkpoint_file(o.checkpoint);
    policy.emplace(policy_from_checkpoint(ck));
    m.input(o.checkpoint);
    cfg["checkpoint_epoch"] = ck.epoch;
  } else if (o.solver == "alns") {
    alns.max_iterations = o.iterations;
    alns.time_limit_s = o.time_limit_s;
    alns.seed = derive_seed(o.seed, "solve.alns");
    validate(alns);
    cfg["iterations"] = o.iterations;
    cfg["time_limit_s"] = o.time_limit_s;
  } else if (o.solver == "exact") {
    cfg["budget"] = o.budget;
  }
  m.config(cfg);

  std::vector<Instance> instances;
  for (const auto& f : files) {
    instances.push_back(read_instance_file(f.string()));
    require_valid(instances.back());
    m.input(f);
  }

  std::vector<Solved> results(instances.size());
  parallel_for(static_cast<int>(instances.size()), o.jobs, [&](int i) {
    const Instance& inst = instances[i];
    const auto t0 = std::chrono::steady_clock::now();
    Solved& r = results[i];
    if (o.solver == "greedy") {
      r.solution = greedy_solve(inst);
    } else if (o.solver == "alns") {
      const AlnsResult a = alns_solve(inst, alns);
      r.solution = a.best;
      r.info = {{"iterations", a.iterations}};
    } else if (o.solver == "neural") {
      r.solution = rollout(*policy, inst, {}).solution;
    } else {
      const ExactResult e = exact_solve(inst, o.budget);
      r.solution = e.solution;
      r.info = {{"optimal", e.optimal}, {"nodes", e.nodes}};
    }
    r.wall_s = seconds_since(t0);
  });

  std::vector<MetricsRow> rows;
  json per_instance = json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string stem = files[i].stem().string();
    const fs::path sol_path = dir / (stem + "." + o.solver + ".json");
    write_solution_file(results[i].solution, instance_hash(instances[i]), sol_path.string());
    m.output(sol_path);
    rows.push_back(metrics_row(stem, o.solver, o.seed, results[i].solution, results[i].wall_s));
    json info = results[i].info;
    info["instance"] = stem;
    per_instance.push_back(info);
    std::printf("%s %s reward %.6f completion %.1f%%\n", stem.c_str(), o.solver.c_str(),
                rows.back().reward, rows.back().completion_pct);
  }
  const fs::path metrics = o.metrics.empty() ? dir / "metrics.csv" : fs::path(o.metrics);
  append_metrics_csv(metrics, rows);
  m.output(metrics);
  m.extra("instances", per_instance);
  m.write(dir / ("solve-" + o.solver + ".manifest.json"));
}
}  // namespace

void add_solve(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<SolveOptions>();
  CLI::App* sub = app.add_subcommand("solve", "Solve instances and append metrics rows");
  sub->add_option("-i,--instance", o->instance, "Instance file or directory")->required();
  sub->add_option("-s,--solver", o->solver, "greedy, alns, neural or exact")
      ->required()
      ->check(CLI::IsMember({"greedy", "alns", "neural", "exact"}));
  sub->add_option("-o,--out", o->out, "Output directory")->required();
  sub->add_option("--checkpoint", o->checkpoint, "Policy checkpoint (neural)");
  sub->add_option("--metrics", o->metrics, "Metrics CSV to append to (default OUT/metrics.csv)");
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--iterations", o->iterations, "ALNS iterations")->capture_default_str();
  sub->add_option("--time-limit", o->time_limit_s, "ALNS wall-clock budget, s (0: none)")
      ->capture_default_str();
  sub->add_option("--budget", o->budget, "Exact solver node budget")->capture_default_str();
  sub->add_option("-j,--jobs", o->jobs, "Instances solved in parallel")->capture_default_str();
  sub->callback([o, &ctx] { ctx.run = [o, &ctx] { run_solve(*o, ctx); }; });
}

}  // namespace edarp::cli
