#include <cstdio>
#include <memory>

#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "edarp/error.hpp"
#include "edarp/instance.hpp"
#include "edarp/rng.hpp"

namespace edarp::cli {

namespace {
struct GenerateOptions {
  int count = 1;
  GeneratorConfig gen;
  std::uint64_t seed = 0;
  std::string out;
};

void run_generate(const GenerateOptions& o, const Context& ctx) {
  if (o.count < 1) throw UsageError("--count must be >= 1");
  if (o.gen.requests < 1) throw UsageError("--requests must be >= 1");
  const fs::path dir(o.out);
  ensure_directory(dir);

  Manifest m("generate", ctx.argv);
  m.seed(o.seed);
  json cfg = to_json(o.gen);
  cfg["requests"] = o.gen.requests;
  cfg["count"] = o.count;
  m.config(cfg);

  for (int i = 0; i < o.count; ++i) {
    GeneratorConfig g = o.gen;
    g.seed = derive_seed(o.seed, "generate", static_cast<std::uint64_t>(i));
    const Instance inst = generate_instance(g);
    char name[32];
    std::snprintf(name, sizeof name, "instance_%04d.json", i);
    write_instance_file(inst, (dir / name).string());
    m.output(dir / name);
  }
  m.write(dir / "generate.manifest.json");
  std::printf("wrote %d instance(s) to %s\n", o.count, dir.string().c_str());
}
}  // namespace

void add_generate(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<GenerateOptions>();
  CLI::App* sub = app.add_subcommand("generate", "Write random instances to a directory");
  sub->add_option("-n,--requests", o->gen.requests, "Requests per instance")->required();
  sub->add_option("--count", o->count, "Number of instances")->capture_default_str();
  sub->add_option("--seed", o->seed, "Base seed")->capture_default_str();
  sub->add_option("-o,--out", o->out, "Output directory")->required();
  sub->add_option("--chargers", o->gen.chargers)->capture_default_str();
  sub->add_option("--vehicles", o->gen.fleet.vehicles)->capture_default_str();
  sub->add_option("--capacity", o->gen.fleet.capacity)->capture_default_str();
  sub->add_option("--battery", o->gen.fleet.battery_kwh, "Battery capacity, kWh")->capture_default_str();
  sub->add_option("--reserve", o->gen.fleet.soc_reserve, "SoC reserve")->capture_default_str();
  sub->add_option("--group-size", o->gen.max_group_size, "Largest passenger group")->capture_default_str();
  sub->add_option("--asymmetry", o->gen.asymmetry)->capture_default_str();
  sub->add_option("--w-energy", o->gen.weights.energy)->capture_default_str();
  sub->add_option("--w-wait", o->gen.weights.wait)->capture_default_str();
  sub->add_option("--w-late", o->gen.weights.late)->capture_default_str();
  sub->add_option("--w-complete", o->gen.weights.complete)->capture_default_str();
  sub->add_option("--w-travel", o->gen.weights.travel)->capture_default_str();
  sub->callback([o, &ctx] { ctx.run = [o, &ctx] { run_generate(*o, ctx); }; });
}

}  // namespace edarp::cli
