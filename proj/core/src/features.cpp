#include <algorithm>
#include <limits>

#include "edarp/instance.hpp"

namespace edarp {

namespace {

// Min-max scaling; a degenerate range maps every value to 0.
double scale(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

std::vector<double> FeatureTensors::edge_inputs() const {
  std::vector<double> out(static_cast<std::size_t>(nodes) * nodes * kEdgeInputDim);
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      double* row = &out[(static_cast<std::size_t>(i) * nodes + j) * kEdgeInputDim];
      for (int f = 0; f < kEdgeFeatureDim; ++f) row[f] = edge(i, j, f);
      for (int f = 0; f < kNodeFeatureDim; ++f) row[kEdgeFeatureDim + f] = node(j, f);
    }
  }
  return out;
}

FeatureTensors normalize_features(const Instance& inst) {
  const int count = inst.node_count();
  FeatureTensors ft;
  ft.nodes = count;
  ft.node_features.assign(static_cast<std::size_t>(count) * kNodeFeatureDim, 0.0);
  ft.edge_features.assign(static_cast<std::size_t>(count) * count * kEdgeFeatureDim, 0.0);

  Range xs, ys, windows, service, load;
  for (const Node& node : inst.nodes) {
    xs.add(node.x);
    ys.add(node.y);
    windows.add(node.window_open);
    windows.add(node.window_close);
    service.add(node.service_time);
    load.add(node.load_delta);
  }
  FeatureScaling& s = ft.scaling;
  s.x_min = xs.lo, s.x_max = xs.hi;
  s.y_min = ys.lo, s.y_max = ys.hi;
  s.window_min = windows.lo, s.window_max = windows.hi;
  s.service_min = service.lo, s.service_max = service.hi;
  s.load_min = load.lo, s.load_max = load.hi;
  s.time_min = inst.edges.time.min(), s.time_max = inst.edges.time.max();
  s.dist_min = inst.edges.distance.min(), s.dist_max = inst.edges.distance.max();
  s.battery_kwh = inst.fleet.battery_kwh;

  for (int i = 0; i < count; ++i) {
    const Node& node = inst.nodes[i];
    double* f = &ft.node_features[static_cast<std::size_t>(i) * kNodeFeatureDim];
    f[static_cast<int>(node.kind)] = 1.0;
    f[4] = scale(node.x, s.x_min, s.x_max);
    f[5] = scale(node.y, s.y_min, s.y_max);
    f[6] = scale(node.window_open, s.window_min, s.window_max);
    f[7] = scale(node.window_close, s.window_min, s.window_max);
    f[8] = scale(node.service_time, s.service_min, s.service_max);
    f[9] = scale(node.load_delta, s.load_min, s.load_max);
  }
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      double* f = &ft.edge_features[(static_cast<std::size_t>(i) * count + j) * kEdgeFeatureDim];
      f[0] = scale(inst.edges.time(i, j), s.time_min, s.time_max);
      f[1] = scale(inst.edges.distance(i, j), s.dist_min, s.dist_max);
      f[2] = std::clamp(inst.edges.energy(i, j) / s.battery_kwh, 0.0, 1.0);
    }
  }
  return ft;
}

}  // namespace edarp
