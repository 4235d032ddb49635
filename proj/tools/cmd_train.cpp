#include <cstdio>
#include <memory>
#include <optional>
#include <sstream>

#include "commands.hpp"
#include "common.hpp"
#include "config.hpp"
#include "edarp/error.hpp"
#include "edarp/rng.hpp"

namespace edarp::cli {

namespace {
struct TrainOptions {
  std::string config;
  std::string out;
  std::string resume;
};

json report_json(const TrainReport& r) {
  json epochs = json::array();
  for (const EpochStats& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_reward", e.val_reward},
                      {"val_completion", e.val_completion},
                      {"grad_norm", e.grad_norm},
                      {"seconds", e.seconds}});
  return {{"initial_val_reward", r.initial_val_reward},
          {"initial_val_completion", r.initial_val_completion},
          {"best_epoch", r.best_epoch},
          {"best_val_reward", r.best_val_reward},
          {"sigma_window", r.sigma_window},
          {"stopped_by_time", r.stopped_by_time},
          {"epochs", epochs}};
}

// Rows of a training log without its header.
std::string log_rows(const std::vector<EpochStats>& epochs) {
  const std::string csv = training_log_csv(epochs);
  return csv.substr(csv.find('\n') + 1);
}

void print_epoch(const EpochStats& e) {
  std::printf("epoch %d loss %.6f val_reward %.6f val_completion %.4f grad_norm %.4f (%.1f s)\n",
              e.epoch, e.train_loss, e.val_reward, e.val_completion, e.grad_norm, e.seconds);
  std::fflush(stdout);
}

void run_train(const TrainOptions& o, const Context& ctx) {
  json j;
  try {
    j = json::parse(read_text(o.config));
  } catch (const json::parse_error& e) {
    throw UsageError(o.config + ": " + e.what());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  const TrainFile t = parse_train_config(j);
  if (!t.curriculum.empty() && !o.resume.empty())
    throw UsageError("--resume is not supported for curriculum runs");

  const fs::path dir(o.out);
  ensure_directory(dir);
  Manifest m("train", ctx.argv);
  m.seed(t.train.seed);
  m.config(to_json(t));
  m.input(o.config);

  std::optional<Policy> policy;
  int first_epoch = 1;
  if (!o.resume.empty()) {
    const Checkpoint ck = read_checkpoint_file(o.resume);
    if (!(ck.config == t.train.policy))
      throw DataError("checkpoint hyperparameters differ from config.policy");
    policy.emplace(policy_from_checkpoint(ck));
    first_epoch = ck.epoch + 1;
    m.input(o.resume);
  } else {
    policy.emplace(t.train.policy, derive_seed(t.train.seed, "policy.init"));
  }

  const fs::path last = dir / "checkpoint_last.json";
  const fs::path log = dir / "training_log.csv";
  int last_epoch = first_epoch - 1;
  auto on_epoch = [&](const EpochStats& e, const Policy& p) {
    write_checkpoint_file(p, e.epoch, last.string());
    last_epoch = e.epoch;
    print_epoch(e);
  };

  json report;
  std::vector<EpochStats> epochs;
  if (t.curriculum.empty()) {
    const auto train_set = make_dataset(t.generator, t.sizes, t.train_instances, t.train.seed, "train");
    const auto val_set = make_dataset(t.generator, t.sizes, t.val_instances, t.train.seed, "val");
    AdamState opt;
    const TrainReport r = train(*policy, opt, t.train, train_set, val_set, first_epoch, on_epoch);
    epochs = r.epochs;
    report = report_json(r);
    if (r.best_epoch >= 0) {
      const fs::path best = dir / "checkpoint_best.json";
      write_checkpoint_file(Policy(t.train.policy, r.best_params), r.best_epoch, best.string());
      m.output(best);
    }
  } else {
    CurriculumConfig cc;
    cc.sizes = t.curriculum;
    cc.train_instances = t.train_instances;
    cc.val_instances = t.val_instances;
    cc.generator = t.generator;
    cc.train = t.train;
    const auto stages = run_curriculum(*policy, cc, on_epoch);
    report = json::object();
    report["stages"] = json::array();
    std::ostringstream csv;
    csv << "stage,requests,zero_shot_val,final_val,best_val\n";
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const CurriculumStage& s = stages[i];
      epochs.insert(epochs.end(), s.report.epochs.begin(), s.report.epochs.end());
      json sj = report_json(s.report);
      sj["requests"] = s.requests;
      sj["zero_shot_val"] = s.zero_shot_val;
      sj["final_val"] = s.final_val;
      report["stages"].push_back(sj);
      csv << i << ',' << s.requests << ',' << s.zero_shot_val << ',' << s.final_val << ','
          << s.best_val << '\n';
      if (s.report.best_epoch >= 0) {
        const fs::path best = dir / ("checkpoint_best_n" + std::to_string(s.requests) + ".json");
        write_checkpoint_file(Policy(t.train.policy, s.report.best_params), s.report.best_epoch,
                              best.string());
        m.output(best);
      }
    }
    write_text(dir / "curriculum.csv", csv.str());
    m.output(dir / "curriculum.csv");
  }

  write_checkpoint_file(*policy, last_epoch, last.string());
  m.output(last);
  const bool append = !o.resume.empty() && fs::exists(log) && fs::file_size(log) > 0;
  if (append) {
    const std::string previous = read_text(log);
    write_text(log, previous + log_rows(epochs));
  } else {
    write_text(log, training_log_csv(epochs));
  }
  m.output(log);
  write_text(dir / "train_report.json", report.dump(2) + "\n");
  m.output(dir / "train_report.json");
  m.extra("first_epoch", first_epoch);
  m.extra("last_epoch", last_epoch);
  m.write(dir / "train.manifest.json");
}
}  // namespace

void add_train(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<TrainOptions>();
  CLI::App* sub = app.add_subcommand("train", "Train a policy with POMO from a JSON config");
  sub->add_option("-c,--config", o->config, "Training config (JSON)")->required();
  sub->add_option("-o,--out", o->out, "Output directory")->required();
  sub->add_option("--resume", o->resume, "Checkpoint to continue from");
  sub->callback([o, &ctx] { ctx.run = [o, &ctx] { run_train(*o, ctx); }; });
}

}  // namespace edarp::cli
