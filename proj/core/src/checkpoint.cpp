#include <fstream>
#include <sstream>

#include "edarp/error.hpp"
#include "edarp/policy.hpp"
#include "json.hpp"

namespace edarp {

using nlohmann::json;

std::string save_checkpoint(const Policy& policy, int epoch) {
  const PolicyConfig& cfg = policy.config();
  json params = json::object();
  const ad::ParameterStore& store = policy.params();
  for (int i = 0; i < store.size(); ++i) {
    const ad::Matrix& m = store.value(i);
    params[store.name(i)] = {{"shape", {m.rows(), m.cols()}}, {"values", m.values()}};
  }
  json j = {{"schema", kPolicySchema},
            {"d_h", cfg.d_h},
            {"heads", cfg.heads},
            {"L", cfg.layers},
            {"d_ff", cfg.ff_dim()},
            {"lambda", cfg.lambda},
            {"kappa", cfg.kappa},
            {"epoch", epoch},
            {"order", json::array()},
            {"params", std::move(params)}};
  for (int i = 0; i < store.size(); ++i) j["order"].push_back(store.name(i));
  return j.dump();
}

Checkpoint load_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    const auto schema = j.at("schema").get<std::string>();
    if (schema != kPolicySchema)
      throw DataError("checkpoint: unsupported schema version '" + schema + "'");
    Checkpoint ck;
    ck.config.d_h = j.at("d_h").get<int>();
    ck.config.heads = j.at("heads").get<int>();
    ck.config.layers = j.at("L").get<int>();
    ck.config.d_ff = j.value("d_ff", 0);
    ck.config.lambda = j.at("lambda").get<double>();
    ck.config.kappa = j.at("kappa").get<double>();
    ck.epoch = j.value("epoch", 0);
    const json& params = j.at("params");
    for (const json& name : j.at("order")) {
      const auto key = name.get<std::string>();
      const json& entry = params.at(key);
      const auto shape = entry.at("shape").get<std::vector<int>>();
      if (shape.size() != 2) throw DataError("checkpoint: parameter '" + key + "' is not 2-D");
      ck.params.add(key, ad::Matrix(shape[0], shape[1], entry.at("values").get<std::vector<double>>()));
    }
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed field (") + e.what() + ")");
  } catch (const ContractViolation& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void write_checkpoint_file(const Policy& policy, int epoch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  out << save_checkpoint(policy, epoch) << '\n';
  if (!out) throw UsageError("write to '" + path + "' failed");
}

Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_checkpoint(buf.str());
}

Policy policy_from_checkpoint(const Checkpoint& ck) { return Policy(ck.config, ck.params); }

}  // namespace edarp
