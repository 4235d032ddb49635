#pragma once

#include <set>
#include <string>

#include "common.hpp"
#include "edarp/error.hpp"
#include "edarp/training.hpp"

namespace edarp::cli {

// Reads fields of a JSON object and rejects keys nobody asked for.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where);

  template <typename T>
  bool get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return false;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw UsageError(where_ + "." + key + ": wrong type");
    }
    return true;
  }
  const json* child(const std::string& key);
  // Throws UsageError naming every unknown key.
  void finish() const;

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_weights(StrictObject& o, CostWeights& w);
void read_generator(const json& j, GeneratorConfig& g);
void read_policy(const json& j, PolicyConfig& p);

json to_json(const CostWeights& w);
json to_json(const GeneratorConfig& g);
json to_json(const PolicyConfig& p);

// Full training run description, parsed from a config file.
struct TrainFile {
  TrainConfig train;
  GeneratorConfig generator;
  std::vector<int> sizes{4};
  int train_instances = 1000;
  int val_instances = 100;
  std::vector<int> curriculum;  // non-empty: one stage per size, `epochs` each
};

TrainFile parse_train_config(const json& j);
json to_json(const TrainFile& t);

}  // namespace edarp::cli
