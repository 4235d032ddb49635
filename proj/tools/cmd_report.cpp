#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "common.hpp"
#include "edarp/error.hpp"

namespace edarp::cli {

namespace {
struct ReportOptions {
  std::vector<std::string> metrics;
  std::string out;
  std::string baseline;
};

const std::vector<std::pair<std::string, double MetricsRow::*>> kColumns = {
    {"reward", &MetricsRow::reward},
    {"objective", &MetricsRow::objective},
    {"completion_pct", &MetricsRow::completion_pct},
    {"load_factor", &MetricsRow::load_factor},
    {"energy_per_vehicle_kwh", &MetricsRow::energy_per_vehicle_kwh},
    {"wait_s", &MetricsRow::wait_s},
    {"late_s", &MetricsRow::late_s},
    {"wall_s", &MetricsRow::wall_s}};

// Mean reward per instance name.
std::map<std::string, double> instance_rewards(const std::vector<MetricsRow>& rows) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& [sum, n] = acc[r.instance];
    sum += r.reward;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

void run_report(const ReportOptions& o, const Context& ctx) {
  const fs::path dir(o.out);
  ensure_directory(dir);
  Manifest m("report", ctx.argv);
  m.config({{"baseline", o.baseline}});

  std::map<std::string, std::vector<MetricsRow>> by_solver;
  for (const auto& path : o.metrics) {
    for (auto& r : read_metrics_csv(path)) by_solver[r.solver].push_back(std::move(r));
    m.input(path);
  }
  if (by_solver.empty()) throw DataError("no metrics rows to report");
  if (!o.baseline.empty() && !by_solver.count(o.baseline))
    throw UsageError("baseline solver '" + o.baseline + "' has no rows");

  std::ostringstream csv;
  csv.precision(17);
  csv << "solver,rows,instances";
  for (const auto& [name, _] : kColumns) csv << ',' << name << "_mean," << name << "_std";
  csv << ",vehicles_mean,vehicles_std,charge_visits_mean,charge_visits_std";
  if (!o.baseline.empty()) csv << ",wins,ties,losses";
  csv << '\n';

  const auto base = o.baseline.empty() ? std::map<std::string, double>{}
                                       : instance_rewards(by_solver[o.baseline]);
  for (const auto& [solver, rows] : by_solver) {
    const auto per_instance = instance_rewards(rows);
    csv << solver << ',' << rows.size() << ',' << per_instance.size();
    for (const auto& [name, field] : kColumns) {
      std::vector<double> xs;
      for (const auto& r : rows) xs.push_back(r.*field);
      const MeanStd ms = mean_std(xs);
      csv << ',' << ms.mean << ',' << ms.std;
    }
    std::vector<double> vehicles, visits;
    for (const auto& r : rows) {
      vehicles.push_back(r.vehicles);
      visits.push_back(r.charge_visits);
    }
    const MeanStd v = mean_std(vehicles), c = mean_std(visits);
    csv << ',' << v.mean << ',' << v.std << ',' << c.mean << ',' << c.std;
    if (!o.baseline.empty()) {
      int wins = 0, ties = 0, losses = 0;
      for (const auto& [inst, reward] : per_instance) {
        const auto it = base.find(inst);
        if (it == base.end()) continue;
        if (reward > it->second) ++wins;
        else if (reward == it->second) ++ties;
        else ++losses;
      }
      csv << ',' << wins << ',' << ties << ',' << losses;
    }
    csv << '\n';
    double total = 0.0;
    for (const auto& r : rows) total += r.reward;
    std::printf("%-10s rows %zu mean reward %.4f\n", solver.c_str(), rows.size(),
                total / static_cast<double>(rows.size()));
  }
  write_text(dir / "summary.csv", csv.str());
  m.output(dir / "summary.csv");
  m.write(dir / "report.manifest.json");
}
}  // namespace

void add_report(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<ReportOptions>();
  CLI::App* sub = app.add_subcommand("report", "Summarize metrics CSVs per solver");
  sub->add_option("-m,--metrics", o->metrics, "Metrics CSV files")->required();
  sub->add_option("-o,--out", o->out, "Output directory")->required();
  sub->add_option("--baseline", o->baseline, "Solver to count per-instance wins against");
  sub->callback([o, &ctx] { ctx.run = [o, &ctx] { run_report(*o, ctx); }; });
}

}  // namespace edarp::cli
