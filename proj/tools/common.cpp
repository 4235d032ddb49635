#include "common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "edarp/error.hpp"
#include "edarp/rng.hpp"

#ifndef EDARP_VERSION
#define EDARP_VERSION "0.0.0"
#endif

namespace edarp::cli {

std::string tool_version() { return EDARP_VERSION; }

namespace {

std::string number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (in_quotes) throw DataError("unterminated quote in CSV row: " + line);
  return fields;
}

template <typename T>
T parse_number(const std::string& s, const char* column) {
  T value{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), value);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw DataError(std::string("bad value for ") + column + ": '" + s + "'");
  return value;
}

}  // namespace

MetricsRow metrics_row(const std::string& instance, const std::string& solver, std::uint64_t seed,
                       const Solution& sol, double wall_s) {
  MetricsRow r;
  r.instance = instance;
  r.solver = solver;
  r.seed = seed;
  r.reward = sol.cost.reward;
  r.objective = sol.cost.objective;
  r.completion_pct = 100.0 * sol.metrics.completion_rate;
  r.vehicles = sol.metrics.vehicles_used;
  r.load_factor = sol.metrics.load_factor;
  r.charge_visits = sol.metrics.charge_visits;
  r.energy_per_vehicle_kwh = sol.metrics.energy_per_vehicle_kwh;
  r.wait_s = sol.metrics.wait_per_request_s;
  r.late_s = sol.metrics.late_per_request_s;
  r.wall_s = wall_s;
  return r;
}

std::string format_row(const MetricsRow& r) {
  std::ostringstream os;
  os << quoted(r.instance) << ',' << quoted(r.solver) << ',' << r.seed << ',' << number(r.reward)
     << ',' << number(r.objective) << ',' << number(r.completion_pct) << ',' << r.vehicles << ','
     << number(r.load_factor) << ',' << r.charge_visits << ',' << number(r.energy_per_vehicle_kwh)
     << ',' << number(r.wait_s) << ',' << number(r.late_s) << ',' << number(r.wall_s);
  return os.str();
}

MetricsRow parse_row(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 13)
    throw DataError("metrics row has " + std::to_string(f.size()) + " fields, expected 13");
  MetricsRow r;
  r.instance = f[0];
  r.solver = f[1];
  r.seed = parse_number<std::uint64_t>(f[2], "seed");
  r.reward = parse_number<double>(f[3], "reward");
  r.objective = parse_number<double>(f[4], "objective");
  r.completion_pct = parse_number<double>(f[5], "completion_pct");
  r.vehicles = parse_number<int>(f[6], "vehicles");
  r.load_factor = parse_number<double>(f[7], "load_factor");
  r.charge_visits = parse_number<int>(f[8], "charge_visits");
  r.energy_per_vehicle_kwh = parse_number<double>(f[9], "energy_per_vehicle_kwh");
  r.wait_s = parse_number<double>(f[10], "wait_s");
  r.late_s = parse_number<double>(f[11], "late_s");
  r.wall_s = parse_number<double>(f[12], "wall_s");
  return r;
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw DataError(path.string() + ": missing or unexpected metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_row(line));
  return rows;
}

void append_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (!fresh) read_metrics_csv(path);  // refuse to append to a foreign file
  std::ofstream out(path, std::ios::app);
  if (!out) throw UsageError("cannot write " + path.string());
  if (fresh) out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
  if (!out) throw UsageError("write failed: " + path.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create directory " + dir.string());
}

std::string file_hash(const fs::path& path) {
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(read_text(path));
  return hex.str();
}

std::vector<fs::path> instance_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    if (name.ends_with("manifest.json")) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> expand_instances(const fs::path& path) {
  if (fs::is_directory(path)) {
    auto files = instance_files(path);
    if (files.empty()) throw DataError("no instance files in " + path.string());
    return files;
  }
  if (!fs::exists(path)) throw DataError("no such file: " + path.string());
  return {path};
}

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

void Manifest::input(const fs::path& p) { inputs_.emplace_back(p.string(), file_hash(p)); }

void Manifest::write(const fs::path& path) const {
  json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["config"] = config_;
  j["seed"] = seed_;
  j["version"] = tool_version();
  j["inputs"] = json::array();
  for (const auto& [p, h] : inputs_) j["inputs"].push_back({{"path", p}, {"hash", h}});
  j["outputs"] = outputs_;
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  j["wall_s"] = seconds_since(start_);
  write_text(path, j.dump(2) + "\n");
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return r;
}

}  // namespace edarp::cli
