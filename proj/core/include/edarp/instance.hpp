#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace edarp {

enum class NodeKind { Depot, Pickup, Delivery, Charger };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view s);

struct Node {
  int id = 0;
  NodeKind kind = NodeKind::Depot;
  int request = -1;  // request index for pickups/deliveries, -1 otherwise
  double x = 0.0;
  double y = 0.0;
  double window_open = 0.0;   // a_i, seconds
  double window_close = 0.0;  // l_i, seconds
  double service_time = 0.0;  // sigma_i, seconds
  int load_delta = 0;         // q_i, passengers

  bool operator==(const Node&) const = default;
};

// Dense |V| x |V| row-major matrix. Not assumed symmetric.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0)
      : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const std::vector<double>& data() const { return data_; }

  double max() const;
  double min() const;

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct EdgeMatrices {
  SquareMatrix time;      // delta, seconds
  SquareMatrix distance;  // d, meters
  SquareMatrix energy;    // epsilon, kWh

  bool operator==(const EdgeMatrices&) const = default;
};

struct Request {
  int id = 0;
  int pickup = 0;
  int delivery = 0;
  double max_ride_time = 0.0;  // seconds, between pickup and delivery service starts

  bool operator==(const Request&) const = default;
};

struct FleetParams {
  int vehicles = 2;            // K
  int capacity = 3;            // Q
  double battery_kwh = 20.0;   // B
  double soc_reserve = 0.1;    // rho

  bool operator==(const FleetParams&) const = default;
};

// Objective J = w_energy*J_e + (w_wait*J_w + w_late*J_l + w_travel*J_t) / time_unit_s,
// reward R = -J + w_complete * n_served.
struct CostWeights {
  double energy = 1.0;
  double wait = 0.1;
  double late = 0.1;
  double complete = 1.0;
  double travel = 0.0;         // only used by the travel-time objective variant
  double time_unit_s = 60.0;   // seconds per unit of time cost

  bool operator==(const CostWeights&) const = default;
};

struct Instance {
  std::vector<Node> nodes;  // [depot, pickups 1..n, deliveries n+1..2n, chargers]
  EdgeMatrices edges;
  std::vector<Request> requests;
  FleetParams fleet;
  CostWeights weights;
  double horizon = 0.0;
  std::uint64_t seed = 0;

  int request_count() const { return static_cast<int>(requests.size()); }
  int node_count() const { return static_cast<int>(nodes.size()); }
  int charger_count() const { return node_count() - 1 - 2 * request_count(); }
  int pickup_of(int request) const { return 1 + request; }
  int delivery_of(int request) const { return 1 + request_count() + request; }

  bool operator==(const Instance&) const = default;
};

struct GeneratorConfig {
  int requests = 4;
  int chargers = 1;
  FleetParams fleet;
  CostWeights weights;
  std::uint64_t seed = 0;
  double asymmetry = 0.2;           // directed multiplier noise u ~ U(0, asymmetry)
  double area_width_m = 3000.0;
  double speed_mps = 25.0 / 3.6;
  double energy_per_km = 0.15;      // e0, kWh/km
  double horizon_s = 3600.0;
  double window_width_s = 900.0;
  double delivery_slack_s = 300.0;
  double pickup_service_s = 60.0;
  double delivery_service_s = 60.0;
  double charger_service_s = 900.0;
  double ride_time_factor = 1.5;
  double ride_slack_s = 300.0;
  int max_group_size = 1;           // q_i ~ U{1..max_group_size}
};

Instance generate_instance(const GeneratorConfig& cfg);

struct Violation {
  std::string field;
  int index = -1;  // node, request, or edge row index; -1 for instance-level fields
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate(const Instance& inst);

// Throws DataError listing the violations when the instance is invalid.
void require_valid(const Instance& inst);

// ---- serialization (schema "edarp-instance/1") ----
inline constexpr std::string_view kInstanceSchema = "edarp-instance/1";

std::string save_instance(const Instance& inst);
Instance load_instance(std::string_view json);

void write_instance_file(const Instance& inst, const std::string& path);
Instance read_instance_file(const std::string& path);

// Stable FNV-1a hash of the serialized instance, hex encoded.
std::string instance_hash(const Instance& inst);

// ---- encoder features ----
struct FeatureScaling {
  double x_min = 0, x_max = 0;
  double y_min = 0, y_max = 0;
  double window_min = 0, window_max = 0;
  double service_min = 0, service_max = 0;
  double load_min = 0, load_max = 0;
  double time_min = 0, time_max = 0;
  double dist_min = 0, dist_max = 0;
  double battery_kwh = 1;
};

inline constexpr int kNodeFeatureDim = 10;  // 4 kind one-hot, x, y, a, l, sigma, q
inline constexpr int kEdgeFeatureDim = 3;   // time, distance, energy / B
inline constexpr int kEdgeInputDim = kEdgeFeatureDim + kNodeFeatureDim;

struct FeatureTensors {
  int nodes = 0;
  std::vector<double> node_features;  // nodes x kNodeFeatureDim
  std::vector<double> edge_features;  // nodes*nodes x kEdgeFeatureDim, row (i,j) = i*nodes+j
  FeatureScaling scaling;

  double node(int i, int f) const { return node_features[i * kNodeFeatureDim + f]; }
  double edge(int i, int j, int f) const {
    return edge_features[(i * nodes + j) * kEdgeFeatureDim + f];
  }
  // Edge (i,j) features with the target node j's features appended.
  std::vector<double> edge_inputs() const;
};

FeatureTensors normalize_features(const Instance& inst);

}  // namespace edarp
