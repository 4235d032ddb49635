#include "config.hpp"

namespace edarp::cli {

StrictObject::StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
  if (!j_.is_object()) throw UsageError(where_ + ": expected an object");
}

const json* StrictObject::child(const std::string& key) {
  seen_.insert(key);
  if (!j_.contains(key)) return nullptr;
  return &j_.at(key);
}

void StrictObject::finish() const {
  std::string unknown;
  for (const auto& [k, v] : j_.items()) {
    if (seen_.count(k)) continue;
    unknown += (unknown.empty() ? "" : ", ") + where_ + "." + k;
  }
  if (!unknown.empty()) throw UsageError("unknown config key(s): " + unknown);
}

void read_weights(StrictObject& o, CostWeights& w) {
  o.get("energy", w.energy);
  o.get("wait", w.wait);
  o.get("late", w.late);
  o.get("complete", w.complete);
  o.get("travel", w.travel);
  o.get("time_unit_s", w.time_unit_s);
}

void read_generator(const json& j, GeneratorConfig& g) {
  StrictObject o(j, "generator");
  o.get("chargers", g.chargers);
  o.get("vehicles", g.fleet.vehicles);
  o.get("capacity", g.fleet.capacity);
  o.get("battery_kwh", g.fleet.battery_kwh);
  o.get("soc_reserve", g.fleet.soc_reserve);
  o.get("max_group_size", g.max_group_size);
  o.get("asymmetry", g.asymmetry);
  o.get("area_width_m", g.area_width_m);
  o.get("horizon_s", g.horizon_s);
  o.get("window_width_s", g.window_width_s);
  o.get("charger_service_s", g.charger_service_s);
  if (const json* w = o.child("weights")) {
    StrictObject wo(*w, "generator.weights");
    read_weights(wo, g.weights);
    wo.finish();
  }
  o.finish();
}

void read_policy(const json& j, PolicyConfig& p) {
  StrictObject o(j, "policy");
  o.get("d_h", p.d_h);
  o.get("heads", p.heads);
  o.get("layers", p.layers);
  o.get("d_ff", p.d_ff);
  o.get("lambda", p.lambda);
  o.get("kappa", p.kappa);
  o.finish();
}

json to_json(const CostWeights& w) {
  return {{"energy", w.energy},     {"wait", w.wait},     {"late", w.late},
          {"complete", w.complete}, {"travel", w.travel}, {"time_unit_s", w.time_unit_s}};
}

json to_json(const GeneratorConfig& g) {
  return {{"chargers", g.chargers},
          {"vehicles", g.fleet.vehicles},
          {"capacity", g.fleet.capacity},
          {"battery_kwh", g.fleet.battery_kwh},
          {"soc_reserve", g.fleet.soc_reserve},
          {"max_group_size", g.max_group_size},
          {"asymmetry", g.asymmetry},
          {"area_width_m", g.area_width_m},
          {"horizon_s", g.horizon_s},
          {"window_width_s", g.window_width_s},
          {"charger_service_s", g.charger_service_s},
          {"weights", to_json(g.weights)}};
}

json to_json(const PolicyConfig& p) {
  return {{"d_h", p.d_h},     {"heads", p.heads},   {"layers", p.layers},
          {"d_ff", p.ff_dim()}, {"lambda", p.lambda}, {"kappa", p.kappa}};
}

TrainFile parse_train_config(const json& j) {
  TrainFile t;
  StrictObject o(j, "config");
  o.get("seed", t.train.seed);
  o.get("requests", t.sizes);
  o.get("train_instances", t.train_instances);
  o.get("val_instances", t.val_instances);
  o.get("pomo_width", t.train.pomo_width);
  o.get("batch_size", t.train.batch_size);
  o.get("epochs", t.train.epochs);
  o.get("lr", t.train.adam.lr);
  o.get("grad_clip", t.train.grad_clip);
  o.get("stability_window", t.train.stability_window);
  o.get("time_limit_s", t.train.time_limit_s);
  o.get("jobs", t.train.jobs);
  o.get("curriculum", t.curriculum);
  if (const json* g = o.child("generator")) read_generator(*g, t.generator);
  if (const json* p = o.child("policy")) read_policy(*p, t.train.policy);
  o.finish();

  if (t.sizes.empty()) throw UsageError("config.requests: at least one size required");
  for (int n : t.sizes)
    if (n < 1) throw UsageError("config.requests: sizes must be >= 1");
  for (int n : t.curriculum)
    if (n < 1) throw UsageError("config.curriculum: sizes must be >= 1");
  if (t.train_instances < 1) throw UsageError("config.train_instances must be >= 1");
  if (t.val_instances < 1) throw UsageError("config.val_instances must be >= 1");
  validate(t.train);
  return t;
}

json to_json(const TrainFile& t) {
  return {{"seed", t.train.seed},
          {"requests", t.sizes},
          {"train_instances", t.train_instances},
          {"val_instances", t.val_instances},
          {"pomo_width", t.train.pomo_width},
          {"batch_size", t.train.batch_size},
          {"epochs", t.train.epochs},
          {"lr", t.train.adam.lr},
          {"grad_clip", t.train.grad_clip},
          {"stability_window", t.train.stability_window},
          {"time_limit_s", t.train.time_limit_s},
          {"jobs", t.train.jobs},
          {"curriculum", t.curriculum},
          {"generator", to_json(t.generator)},
          {"policy", to_json(t.train.policy)}};
}

}  // namespace edarp::cli
