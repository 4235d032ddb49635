#include "edarp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "edarp/error.hpp"
#include "edarp/rng.hpp"

namespace edarp {

using ad::Matrix;

namespace {

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results must be
// written to per-index slots so the caller can reduce in a fixed order.
template <typename F>
void parallel_for(int count, int jobs, F&& fn) {
  jobs = std::clamp(jobs, 1, std::max(1, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void adam_step(ad::ParameterStore& params, const ad::Gradients& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (static_cast<int>(grads.grads.size()) != params.size())
    throw ContractViolation("adam_step: gradient count does not match parameters");
  if (state.m.empty()) {
    for (int i = 0; i < params.size(); ++i) {
      state.m.emplace_back(params.value(i).rows(), params.value(i).cols());
      state.v.emplace_back(params.value(i).rows(), params.value(i).cols());
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (int i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    const Matrix& g = grads.grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

std::vector<double> pomo_advantages(const std::vector<double>& rewards) {
  if (rewards.empty()) return {};
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / rewards.size();
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  return adv;
}

std::vector<int> pomo_first_actions(const Instance& inst, int width, Rng& rng) {
  if (width < 1) throw UsageError("pomo: width must be >= 1");
  const Environment env(inst);
  const FleetEpisodeState s = env.reset(false);
  std::vector<int> firsts;
  for (int j = 1; j <= inst.request_count(); ++j)
    if (env.allowed(s, j)) firsts.push_back(j);
  if (firsts.empty()) throw UsageError("pomo: no feasible first pickup");
  if (static_cast<int>(firsts.size()) > width) {
    for (int t = 0; t < width; ++t) {
      const int k = uniform_int(rng, t, static_cast<int>(firsts.size()) - 1);
      std::swap(firsts[t], firsts[k]);
    }
    firsts.resize(width);
    std::sort(firsts.begin(), firsts.end());
  }
  return firsts;
}

PomoResult pomo_instance(const Policy& policy, const Instance& inst, int width,
                         std::uint64_t seed) {
  PomoResult out;
  Rng rng = make_rng(seed, "pomo.first");
  out.first_actions = pomo_first_actions(inst, width, rng);
  const int k = static_cast<int>(out.first_actions.size());

  ad::Tape tape(&policy.params());
  const Encoded enc = encode(tape, policy, normalize_features(inst));
  std::vector<ad::Var> log_probs;
  for (int i = 0; i < k; ++i) {
    RolloutOptions opt;
    opt.mode = DecodeMode::Sample;
    opt.forced_actions = {out.first_actions[i]};
    opt.seed = derive_seed(seed, "pomo.rollout", i);
    RolloutResult r = rollout(tape, policy, enc, inst, opt);
    out.rewards.push_back(r.solution.cost.reward);
    out.log_probs.push_back(r.log_prob);
    log_probs.push_back(r.log_prob_var);
  }
  out.advantages = pomo_advantages(out.rewards);

  Matrix adv(k, 1);
  for (int i = 0; i < k; ++i) adv(i, 0) = out.advantages[i];
  ad::Var weighted = ad::matmul(ad::concat_cols(log_probs), tape.constant(adv));
  ad::Var loss = ad::scale(weighted, -1.0 / k);
  out.loss = loss.value()[0];
  out.grads = ad::Gradients::zeros_like(policy.params());
  tape.backward(loss);
  tape.accumulate(out.grads);
  return out;
}

void validate(const TrainConfig& cfg) {
  validate(cfg.policy);
  if (cfg.pomo_width < 2) throw UsageError("train: pomo_width must be >= 2");
  if (cfg.batch_size < 1) throw UsageError("train: batch_size must be >= 1");
  if (cfg.epochs < 0) throw UsageError("train: epochs must be >= 0");
  if (!(cfg.adam.lr > 0.0)) throw UsageError("train: lr must be > 0");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0 && cfg.adam.beta2 >= 0.0 &&
        cfg.adam.beta2 < 1.0))
    throw UsageError("train: Adam betas must lie in [0, 1)");
  if (!(cfg.adam.eps > 0.0)) throw UsageError("train: Adam eps must be > 0");
  if (!(cfg.grad_clip > 0.0)) throw UsageError("train: grad_clip must be > 0");
  if (cfg.stability_window < 1) throw UsageError("train: stability_window must be >= 1");
  if (cfg.jobs < 1) throw UsageError("train: jobs must be >= 1");
}

ValidationStats validate_policy(const Policy& policy, const std::vector<Instance>& set, int jobs) {
  ValidationStats stats;
  if (set.empty()) return stats;
  std::vector<double> reward(set.size()), completion(set.size());
  parallel_for(static_cast<int>(set.size()), jobs, [&](int i) {
    const RolloutResult r = rollout(policy, set[i], RolloutOptions{});
    reward[i] = r.solution.cost.reward;
    completion[i] = r.solution.metrics.completion_rate;
  });
  for (std::size_t i = 0; i < set.size(); ++i) {
    stats.reward += reward[i];
    stats.completion += completion[i];
  }
  stats.reward /= set.size();
  stats.completion /= set.size();
  return stats;
}

std::vector<Instance> make_dataset(const GeneratorConfig& base, const std::vector<int>& sizes,
                                   int count, std::uint64_t seed, std::string_view label) {
  if (sizes.empty()) throw UsageError("make_dataset: no instance sizes given");
  Rng rng = make_rng(seed, std::string(label) + ".sizes");
  std::vector<Instance> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    GeneratorConfig cfg = base;
    cfg.requests = sizes[uniform_int(rng, 0, static_cast<int>(sizes.size()) - 1)];
    cfg.seed = derive_seed(seed, label, i);
    out.push_back(generate_instance(cfg));
  }
  return out;
}

TrainReport train(Policy& policy, AdamState& opt, const TrainConfig& cfg,
                  const std::vector<Instance>& train_set, const std::vector<Instance>& val_set,
                  int first_epoch, const EpochCallback& on_epoch) {
  validate(cfg);
  if (policy.config().d_h != cfg.policy.d_h || policy.config().heads != cfg.policy.heads ||
      policy.config().layers != cfg.policy.layers ||
      policy.config().ff_dim() != cfg.policy.ff_dim())
    throw DataError("train: policy hyperparameters differ from the training configuration");
  if (train_set.empty() && cfg.epochs > 0) throw UsageError("train: empty training set");

  const auto t_start = std::chrono::steady_clock::now();
  TrainReport report;
  const ValidationStats initial = validate_policy(policy, val_set, cfg.jobs);
  report.initial_val_reward = initial.reward;
  report.initial_val_completion = initial.completion;
  report.best_params = policy.params();

  const int n = static_cast<int>(train_set.size());
  std::uint64_t group = 0;
  for (int e = 0; e < cfg.epochs && !report.stopped_by_time; ++e) {
    const int epoch = first_epoch + e;
    const auto t_epoch = std::chrono::steady_clock::now();
    Rng shuffle = make_rng(cfg.seed, "train.shuffle", epoch);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int t = 0; t + 1 < n; ++t) std::swap(order[t], order[uniform_int(shuffle, t, n - 1)]);

    double loss_sum = 0.0, norm_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int size = std::min(cfg.batch_size, n - start);
      std::vector<PomoResult> results(size);
      const std::uint64_t base = group;
      parallel_for(size, cfg.jobs, [&](int i) {
        const std::uint64_t s = derive_seed(cfg.seed, "train.pomo",
                                            static_cast<std::uint64_t>(epoch) << 32 | (base + i));
        results[i] = pomo_instance(policy, train_set[order[start + i]], cfg.pomo_width, s);
      });
      group += size;

      ad::Gradients grads = ad::Gradients::zeros_like(policy.params());
      double loss = 0.0;
      for (const PomoResult& r : results) {
        grads.add(r.grads);
        loss += r.loss;
      }
      grads.scale(1.0 / size);
      loss /= size;
      const double norm = grads.global_norm();
      if (!std::isfinite(norm) || !std::isfinite(loss))
        throw NumericalError("train: non-finite loss or gradient at epoch " +
                             std::to_string(epoch));
      if (norm > cfg.grad_clip) grads.scale(cfg.grad_clip / norm);
      adam_step(policy.params(), grads, opt, cfg.adam);
      loss_sum += loss;
      norm_sum += norm;
      ++batches;
      if (cfg.time_limit_s > 0.0 && seconds_since(t_start) >= cfg.time_limit_s) {
        report.stopped_by_time = true;
        break;
      }
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = batches ? loss_sum / batches : 0.0;
    st.grad_norm = batches ? norm_sum / batches : 0.0;
    const ValidationStats val = validate_policy(policy, val_set, cfg.jobs);
    st.val_reward = val.reward;
    st.val_completion = val.completion;
    st.seconds = seconds_since(t_epoch);
    report.epochs.push_back(st);
    if (report.best_epoch < 0 || st.val_reward > report.best_val_reward) {
      report.best_epoch = epoch;
      report.best_val_reward = st.val_reward;
      report.best_params = policy.params();
    }
    if (on_epoch) on_epoch(st, policy);
  }

  if (!report.epochs.empty()) {
    const int w = std::min<int>(cfg.stability_window, static_cast<int>(report.epochs.size()));
    double mean = 0.0;
    for (int i = static_cast<int>(report.epochs.size()) - w; i < static_cast<int>(report.epochs.size()); ++i)
      mean += report.epochs[i].val_reward;
    mean /= w;
    double var = 0.0;
    for (int i = static_cast<int>(report.epochs.size()) - w; i < static_cast<int>(report.epochs.size()); ++i)
      var += (report.epochs[i].val_reward - mean) * (report.epochs[i].val_reward - mean);
    report.sigma_window = std::sqrt(var / w);
  }
  return report;
}

std::vector<int> curriculum_sizes(int first, double factor, int stages) {
  if (first < 1 || !(factor > 1.0) || stages < 1)
    throw UsageError("curriculum: need first >= 1, factor > 1, stages >= 1");
  std::vector<int> out;
  for (int i = 0; i < stages; ++i)
    out.push_back(static_cast<int>(std::lround(first * std::pow(factor, i))));
  return out;
}

std::vector<CurriculumStage> run_curriculum(Policy& policy, const CurriculumConfig& cfg,
                                            const EpochCallback& on_epoch) {
  if (cfg.sizes.empty()) throw UsageError("curriculum: no stages");
  std::vector<CurriculumStage> stages;
  int epoch = 1;
  for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
    const int n = cfg.sizes[i];
    const std::string tag = "curriculum." + std::to_string(n);
    const auto train_set =
        make_dataset(cfg.generator, {n}, cfg.train_instances, cfg.train.seed, tag + ".train");
    const auto val_set =
        make_dataset(cfg.generator, {n}, cfg.val_instances, cfg.train.seed, tag + ".val");
    CurriculumStage stage;
    stage.requests = n;
    AdamState opt;
    stage.report = train(policy, opt, cfg.train, train_set, val_set, epoch, on_epoch);
    stage.zero_shot_val = stage.report.initial_val_reward;
    stage.final_val =
        stage.report.epochs.empty() ? stage.zero_shot_val : stage.report.epochs.back().val_reward;
    stage.best_val = stage.report.best_val_reward;
    epoch += static_cast<int>(stage.report.epochs.size());
    stages.push_back(std::move(stage));
  }
  return stages;
}

std::string training_log_csv(const std::vector<EpochStats>& epochs) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_loss,val_reward,val_completion,grad_norm,seconds\n";
  for (const EpochStats& e : epochs)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_reward << ',' << e.val_completion << ','
        << e.grad_norm << ',' << e.seconds << '\n';
  return out.str();
}

}  // namespace edarp
