#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edarp/autodiff.hpp"
#include "edarp/environment.hpp"
#include "edarp/instance.hpp"

namespace edarp {

struct PolicyConfig {
  int d_h = 64;
  int heads = 4;
  int layers = 4;
  int d_ff = 0;  // 0 means 2 * d_h
  double lambda = 1.0;
  double kappa = 10.0;

  int ff_dim() const { return d_ff > 0 ? d_ff : 2 * d_h; }
  bool operator==(const PolicyConfig& o) const {
    return d_h == o.d_h && heads == o.heads && layers == o.layers && ff_dim() == o.ff_dim() &&
           lambda == o.lambda && kappa == o.kappa;
  }
};

void validate(const PolicyConfig& cfg);

// Edge-attention encoder plus pointer decoder. Parameters live in a
// ParameterStore so they can be shared read-only across rollouts.
class Policy {
 public:
  Policy(const PolicyConfig& cfg, std::uint64_t seed);
  Policy(const PolicyConfig& cfg, ad::ParameterStore params);

  const PolicyConfig& config() const { return cfg_; }
  const ad::ParameterStore& params() const { return params_; }
  ad::ParameterStore& params() { return params_; }

  // Names and shapes every policy with this config carries, in store order.
  static std::vector<std::pair<std::string, std::pair<int, int>>> layout(const PolicyConfig& cfg);

 private:
  PolicyConfig cfg_;
  ad::ParameterStore params_;
};

// Per-instance encoder output on a tape.
struct Encoded {
  int nodes = 0;
  ad::Var Z;        // nodes x d_h
  ad::Var keys;     // Z W_k
  ad::Var graph;    // mean(Z) W_graph
  ad::Var depot;    // z_0 W_depot
  ad::Var current;  // Z W_curr
  ad::Var visited;  // Z W_visited
  ad::Var masked;   // Z W_mask
};

// Runs the L edge-attention layers and the incoming-edge aggregation.
ad::Var encode_nodes(ad::Tape& tape, const Policy& policy, const FeatureTensors& features);
Encoded encode(ad::Tape& tape, const Policy& policy, const FeatureTensors& features);

// Probability vector (1 x |V|) over next nodes for state `s` under `mask`.
ad::Var decode_step(ad::Tape& tape, const Policy& policy, const Encoded& enc, const Instance& inst,
                    const FleetEpisodeState& s, const FeasibilityMask& mask);

// Convenience: the decode_step distribution as plain numbers on a throwaway tape.
std::vector<double> action_probabilities(const Policy& policy, const Instance& inst,
                                         const FleetEpisodeState& s, const FeasibilityMask& mask);

enum class DecodeMode { Greedy, Sample };

struct RolloutOptions {
  DecodeMode mode = DecodeMode::Greedy;
  std::vector<int> forced_actions;  // applied first, in order; the POMO hook uses one
  NoiseConfig noise;
  std::uint64_t seed = 0;  // sampling stream
};

struct RolloutResult {
  Solution solution;
  std::vector<int> actions;
  double log_prob = 0.0;
  ad::Var log_prob_var;  // valid on the tape passed in
};

// Decodes one full episode against an already encoded instance.
RolloutResult rollout(ad::Tape& tape, const Policy& policy, const Encoded& enc, const Instance& inst,
                      const RolloutOptions& opt);
// Self-contained rollout without gradient tracking.
RolloutResult rollout(const Policy& policy, const Instance& inst, const RolloutOptions& opt);

// Checkpoints: JSON with a hyperparameter header and name -> {shape, values}.
inline constexpr std::string_view kPolicySchema = "edarp-policy/1";

struct Checkpoint {
  PolicyConfig config;
  ad::ParameterStore params;
  int epoch = 0;
};

std::string save_checkpoint(const Policy& policy, int epoch);
Checkpoint load_checkpoint(std::string_view json);
void write_checkpoint_file(const Policy& policy, int epoch, const std::string& path);
Checkpoint read_checkpoint_file(const std::string& path);
Policy policy_from_checkpoint(const Checkpoint& ck);

}  // namespace edarp
