#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edarp/autodiff.hpp"
#include "edarp/instance.hpp"
#include "edarp/policy.hpp"

namespace edarp {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long step = 0;
  std::vector<ad::Matrix> m;
  std::vector<ad::Matrix> v;
};

// One bias-corrected Adam update of every parameter.
void adam_step(ad::ParameterStore& params, const ad::Gradients& grads, AdamState& state,
               const AdamConfig& cfg);

// R_i - mean(R).
std::vector<double> pomo_advantages(const std::vector<double>& rewards);

// Distinct feasible first pickups; when more than `width` exist, `width` of
// them drawn without replacement. Throws UsageError when none is feasible.
std::vector<int> pomo_first_actions(const Instance& inst, int width, Rng& rng);

struct PomoResult {
  std::vector<int> first_actions;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> log_probs;
  double loss = 0.0;
  ad::Gradients grads;  // gradient of this instance's loss
};

// Samples one POMO group on one instance and differentiates
// -(1/K) sum_i adv_i * logp_i.
PomoResult pomo_instance(const Policy& policy, const Instance& inst, int width,
                         std::uint64_t seed);

struct TrainConfig {
  PolicyConfig policy;
  int pomo_width = 8;
  int batch_size = 32;
  int epochs = 1;
  AdamConfig adam;
  double grad_clip = 1.0;
  int stability_window = 50;
  double time_limit_s = 0.0;  // 0: no limit; checked between batches
  int jobs = 1;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_reward = 0.0;
  double val_completion = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm over the epoch's batches
  double seconds = 0.0;
};

struct TrainReport {
  double initial_val_reward = 0.0;
  double initial_val_completion = 0.0;
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // -1 when no epoch ran
  double best_val_reward = 0.0;
  ad::ParameterStore best_params;
  double sigma_window = 0.0;  // std of the last `stability_window` validation rewards
  bool stopped_by_time = false;
};

struct ValidationStats {
  double reward = 0.0;
  double completion = 0.0;
};

// Greedy-decoded mean reward and completion over a set.
ValidationStats validate_policy(const Policy& policy, const std::vector<Instance>& set, int jobs = 1);

// Training instances with n drawn uniformly from `sizes` per instance.
std::vector<Instance> make_dataset(const GeneratorConfig& base, const std::vector<int>& sizes,
                                   int count, std::uint64_t seed, std::string_view label);

using EpochCallback = std::function<void(const EpochStats&, const Policy&)>;

// Trains in place. Epoch numbers continue from `first_epoch`.
TrainReport train(Policy& policy, AdamState& opt, const TrainConfig& cfg,
                  const std::vector<Instance>& train_set, const std::vector<Instance>& val_set,
                  int first_epoch = 1, const EpochCallback& on_epoch = {});

struct CurriculumStage {
  int requests = 0;
  double zero_shot_val = 0.0;  // previous model on this size, before fine-tuning
  double final_val = 0.0;      // after the stage's last epoch
  double best_val = 0.0;
  TrainReport report;
};

struct CurriculumConfig {
  std::vector<int> sizes{8, 10, 12, 14, 17, 21};
  int train_instances = 64;
  int val_instances = 32;
  GeneratorConfig generator;
  TrainConfig train;  // epochs here are per stage
};

// sizes[i] = round(sizes[0] * factor^i).
std::vector<int> curriculum_sizes(int first, double factor, int stages);

std::vector<CurriculumStage> run_curriculum(Policy& policy, const CurriculumConfig& cfg,
                                            const EpochCallback& on_epoch = {});

std::string training_log_csv(const std::vector<EpochStats>& epochs);

}  // namespace edarp
