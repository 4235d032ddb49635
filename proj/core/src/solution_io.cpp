#include "edarp/solution_io.hpp"

#include <fstream>
#include <sstream>

#include "edarp/error.hpp"
#include "json.hpp"

namespace edarp {

using nlohmann::json;

std::string save_solution(const Solution& sol, const std::string& instance_ref) {
  json routes = json::array();
  for (const auto& route : sol.routes) {
    json stops = json::array();
    for (const RouteStop& s : route) {
      stops.push_back({{"node", s.node},
                       {"arrival", s.arrival},
                       {"serviceStart", s.service_start},
                       {"soc", s.soc},
                       {"chargeDelta", s.charge_delta},
                       {"load", s.load}});
    }
    routes.push_back(std::move(stops));
  }
  const SolutionMetrics& m = sol.metrics;
  json j = {
      {"schema", kSolutionSchema},
      {"instanceSeedOrHash", instance_ref},
      {"served", sol.served},
      {"requests", sol.requests},
      {"routes", std::move(routes)},
      {"cost",
       {{"energy", sol.cost.energy_kwh},
        {"wait", sol.cost.wait_s},
        {"late", sol.cost.late_s},
        {"travel", sol.cost.travel_s},
        {"objective", sol.cost.objective},
        {"reward", sol.cost.reward}}},
      {"metrics",
       {{"completionRate", m.completion_rate},
        {"vehiclesUsed", m.vehicles_used},
        {"loadFactor", m.load_factor},
        {"chargeVisits", m.charge_visits},
        {"energyPerVehicle", m.energy_per_vehicle_kwh},
        {"waitPerRequest", m.wait_per_request_s},
        {"latePerRequest", m.late_per_request_s},
        {"fallbackSteps", m.fallback_steps}}},
  };
  return j.dump(1);
}

LoadedSolution load_solution(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw DataError("solution parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    const auto schema = j.at("schema").get<std::string>();
    if (schema != kSolutionSchema)
      throw DataError("solution: unsupported schema version '" + schema + "'");
    LoadedSolution out;
    const json& ref = j.at("instanceSeedOrHash");
    out.instance_ref = ref.is_string() ? ref.get<std::string>() : ref.dump();
    Solution& sol = out.solution;
    sol.served = j.value("served", 0);
    sol.requests = j.value("requests", 0);
    for (const json& jr : j.at("routes")) {
      std::vector<RouteStop> route;
      for (const json& js : jr) {
        RouteStop s;
        s.node = js.at("node").get<int>();
        s.arrival = js.at("arrival").get<double>();
        s.service_start = js.at("serviceStart").get<double>();
        s.soc = js.at("soc").get<double>();
        s.charge_delta = js.at("chargeDelta").get<double>();
        s.load = js.value("load", 0);
        route.push_back(s);
      }
      sol.routes.push_back(std::move(route));
    }
    const json& c = j.at("cost");
    sol.cost.energy_kwh = c.at("energy").get<double>();
    sol.cost.wait_s = c.at("wait").get<double>();
    sol.cost.late_s = c.at("late").get<double>();
    sol.cost.travel_s = c.value("travel", 0.0);
    sol.cost.objective = c.at("objective").get<double>();
    sol.cost.reward = c.at("reward").get<double>();
    if (j.contains("metrics")) {
      const json& m = j.at("metrics");
      sol.metrics.completion_rate = m.value("completionRate", 0.0);
      sol.metrics.vehicles_used = m.value("vehiclesUsed", 0);
      sol.metrics.load_factor = m.value("loadFactor", 0.0);
      sol.metrics.charge_visits = m.value("chargeVisits", 0);
      sol.metrics.energy_per_vehicle_kwh = m.value("energyPerVehicle", 0.0);
      sol.metrics.wait_per_request_s = m.value("waitPerRequest", 0.0);
      sol.metrics.late_per_request_s = m.value("latePerRequest", 0.0);
      sol.metrics.fallback_steps = m.value("fallbackSteps", 0);
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("solution: malformed field (") + e.what() + ")");
  }
}

void write_solution_file(const Solution& sol, const std::string& instance_ref,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  out << save_solution(sol, instance_ref) << '\n';
  if (!out) throw UsageError("write to '" + path + "' failed");
}

LoadedSolution read_solution_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open solution file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_solution(buf.str());
}

}  // namespace edarp
