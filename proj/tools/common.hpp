#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "edarp/environment.hpp"
#include "json.hpp"

namespace edarp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

std::string tool_version();

// ---- metrics rows ----

inline constexpr std::string_view kMetricsHeader =
    "instance,solver,seed,reward,objective,completion_pct,vehicles,load_factor,charge_visits,"
    "energy_per_vehicle_kwh,wait_s,late_s,wall_s";

struct MetricsRow {
  std::string instance;
  std::string solver;
  std::uint64_t seed = 0;
  double reward = 0.0;
  double objective = 0.0;
  double completion_pct = 0.0;
  int vehicles = 0;
  double load_factor = 0.0;
  int charge_visits = 0;
  double energy_per_vehicle_kwh = 0.0;
  double wait_s = 0.0;  // per request
  double late_s = 0.0;  // per request
  double wall_s = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

MetricsRow metrics_row(const std::string& instance, const std::string& solver, std::uint64_t seed,
                       const Solution& sol, double wall_s);
std::string format_row(const MetricsRow& row);
MetricsRow parse_row(const std::string& line);
std::vector<MetricsRow> read_metrics_csv(const fs::path& path);
// Appends rows, writing the header first when the file is new or empty.
void append_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows);

// ---- files ----

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
void ensure_directory(const fs::path& dir);
std::string file_hash(const fs::path& path);
// Instance files in a directory, sorted by name; manifests are skipped.
std::vector<fs::path> instance_files(const fs::path& dir);
// A file, or every instance file of a directory.
std::vector<fs::path> expand_instances(const fs::path& path);

// ---- manifest ----

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv);

  void config(json c) { config_ = std::move(c); }
  void seed(std::uint64_t s) { seed_ = s; }
  void input(const fs::path& p);
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }
  void write(const fs::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
  json extra_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

// ---- parallelism ----

// fn(i) for i in [0, count) on up to `jobs` threads; callers write per-index slots.
template <typename F>
void parallel_for(int count, int jobs, F&& fn) {
  jobs = std::max(1, std::min(jobs, count));
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
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
// Sample standard deviation; 0 for fewer than two values.
MeanStd mean_std(const std::vector<double>& xs);

}  // namespace edarp::cli
