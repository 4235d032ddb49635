#include <fstream>
#include <iomanip>
#include <sstream>

#include "edarp/error.hpp"
#include "edarp/instance.hpp"
#include "edarp/rng.hpp"
#include "json.hpp"

namespace edarp {

using nlohmann::json;

namespace {

json matrix_to_json(const SquareMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

SquareMatrix matrix_from_json(const json& rows, const char* name) {
  if (!rows.is_array()) throw DataError(std::string("edges.") + name + ": expected array");
  const std::size_t n = rows.size();
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = rows[i];
    if (!row.is_array() || row.size() != n)
      throw DataError(std::string("edges.") + name + ": row " + std::to_string(i) +
                      " is not of length " + std::to_string(n));
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j].is_number())
        throw DataError(std::string("edges.") + name + ": non-numeric entry");
      m(i, j) = row[j].get<double>();
    }
  }
  return m;
}

template <typename T>
T field(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw DataError(std::string(where) + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string(where) + ": field '" + key + "' has wrong type (" + e.what() +
                    ")");
  }
}

}  // namespace

std::string save_instance(const Instance& inst) {
  json j;
  j["schema"] = kInstanceSchema;
  j["n"] = inst.request_count();
  j["horizon"] = inst.horizon;
  j["seed"] = inst.seed;
  j["fleet"] = {{"vehicles", inst.fleet.vehicles},
                {"capacity", inst.fleet.capacity},
                {"battery", inst.fleet.battery_kwh},
                {"reserve", inst.fleet.soc_reserve}};
  j["weights"] = {{"energy", inst.weights.energy},     {"wait", inst.weights.wait},
                  {"late", inst.weights.late},         {"complete", inst.weights.complete},
                  {"travel", inst.weights.travel},     {"timeUnit", inst.weights.time_unit_s}};
  json nodes = json::array();
  for (const Node& node : inst.nodes) {
    nodes.push_back({{"id", node.id},
                     {"kind", to_string(node.kind)},
                     {"x", node.x},
                     {"y", node.y},
                     {"a", node.window_open},
                     {"l", node.window_close},
                     {"sigma", node.service_time},
                     {"q", node.load_delta}});
  }
  j["nodes"] = std::move(nodes);
  json requests = json::array();
  for (const Request& r : inst.requests) {
    requests.push_back({{"id", r.id},
                        {"pickup", r.pickup},
                        {"delivery", r.delivery},
                        {"maxRide", r.max_ride_time}});
  }
  j["requests"] = std::move(requests);
  j["edges"] = {{"time", matrix_to_json(inst.edges.time)},
                {"dist", matrix_to_json(inst.edges.distance)},
                {"energy", matrix_to_json(inst.edges.energy)}};
  return j.dump();
}

Instance load_instance(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw DataError("instance parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("instance: top level must be an object");
  const auto schema = field<std::string>(j, "schema", "instance");
  if (schema != kInstanceSchema)
    throw DataError("instance: unsupported schema version '" + schema + "' (expected '" +
                    std::string(kInstanceSchema) + "')");

  Instance inst;
  const int n = field<int>(j, "n", "instance");
  inst.horizon = field<double>(j, "horizon", "instance");
  inst.seed = j.value("seed", std::uint64_t{0});

  const json& fleet = j.at("fleet");
  inst.fleet.vehicles = field<int>(fleet, "vehicles", "fleet");
  inst.fleet.capacity = field<int>(fleet, "capacity", "fleet");
  inst.fleet.battery_kwh = field<double>(fleet, "battery", "fleet");
  inst.fleet.soc_reserve = field<double>(fleet, "reserve", "fleet");

  const json& w = j.at("weights");
  inst.weights.energy = field<double>(w, "energy", "weights");
  inst.weights.wait = field<double>(w, "wait", "weights");
  inst.weights.late = field<double>(w, "late", "weights");
  inst.weights.complete = field<double>(w, "complete", "weights");
  inst.weights.travel = w.value("travel", 0.0);
  inst.weights.time_unit_s = w.value("timeUnit", 60.0);

  for (const json& jn : field<json>(j, "nodes", "instance")) {
    Node node;
    node.id = field<int>(jn, "id", "node");
    node.kind = node_kind_from_string(field<std::string>(jn, "kind", "node"));
    node.x = field<double>(jn, "x", "node");
    node.y = field<double>(jn, "y", "node");
    node.window_open = field<double>(jn, "a", "node");
    node.window_close = field<double>(jn, "l", "node");
    node.service_time = field<double>(jn, "sigma", "node");
    node.load_delta = field<int>(jn, "q", "node");
    inst.nodes.push_back(node);
  }
  for (std::size_t i = 0; i < inst.nodes.size(); ++i) {
    Node& node = inst.nodes[i];
    const int idx = static_cast<int>(i);
    if (node.kind == NodeKind::Pickup) node.request = idx - 1;
    if (node.kind == NodeKind::Delivery) node.request = idx - 1 - n;
  }
  for (const json& jr : field<json>(j, "requests", "instance")) {
    Request r;
    r.id = field<int>(jr, "id", "request");
    r.pickup = field<int>(jr, "pickup", "request");
    r.delivery = field<int>(jr, "delivery", "request");
    r.max_ride_time = field<double>(jr, "maxRide", "request");
    inst.requests.push_back(r);
  }
  if (inst.request_count() != n)
    throw DataError("instance: n = " + std::to_string(n) + " but " +
                    std::to_string(inst.requests.size()) + " requests listed");

  const json& edges = j.at("edges");
  inst.edges.time = matrix_from_json(edges.at("time"), "time");
  inst.edges.distance = matrix_from_json(edges.at("dist"), "dist");
  inst.edges.energy = matrix_from_json(edges.at("energy"), "energy");
  return inst;
}

void write_instance_file(const Instance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  out << save_instance(inst) << '\n';
  if (!out) throw UsageError("write to '" + path + "' failed");
}

Instance read_instance_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open instance file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_instance(buf.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string instance_hash(const Instance& inst) {
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(save_instance(inst));
  return hex.str();
}

}  // namespace edarp
