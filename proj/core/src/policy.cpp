#include "edarp/policy.hpp"

#include <cmath>
#include <limits>

#include "edarp/error.hpp"
#include "edarp/rng.hpp"

namespace edarp {

using ad::Matrix;
using ad::Tape;
using ad::Var;

void validate(const PolicyConfig& cfg) {
  if (cfg.d_h < 1) throw UsageError("policy: d_h must be >= 1");
  if (cfg.heads < 1 || cfg.d_h % cfg.heads != 0)
    throw UsageError("policy: heads must divide d_h");
  if (cfg.layers < 0) throw UsageError("policy: layers must be >= 0");
  if (cfg.d_ff < 0) throw UsageError("policy: d_ff must be >= 0");
  if (cfg.lambda < 0.0) throw UsageError("policy: lambda must be >= 0");
  if (!(cfg.kappa > 0.0)) throw UsageError("policy: kappa must be > 0");
}

std::vector<std::pair<std::string, std::pair<int, int>>> Policy::layout(const PolicyConfig& cfg) {
  const int d = cfg.d_h;
  const int f = cfg.ff_dim();
  std::vector<std::pair<std::string, std::pair<int, int>>> out;
  out.push_back({"embed.W", {kEdgeInputDim, d}});
  out.push_back({"embed.b", {1, d}});
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    out.push_back({p + "Wq", {d, d}});
    out.push_back({p + "Wk", {d, d}});
    out.push_back({p + "Wv", {d, d}});
    out.push_back({p + "Wo", {d, d}});
    out.push_back({p + "ln1.gain", {1, d}});
    out.push_back({p + "ln1.bias", {1, d}});
    out.push_back({p + "ff.W1", {d, f}});
    out.push_back({p + "ff.b1", {1, f}});
    out.push_back({p + "ff.W2", {f, d}});
    out.push_back({p + "ff.b2", {1, d}});
    out.push_back({p + "ln2.gain", {1, d}});
    out.push_back({p + "ln2.bias", {1, d}});
  }
  out.push_back({"agg.w", {d, 1}});
  for (const char* name : {"dec.W_curr", "dec.W_depot", "dec.W_graph", "dec.W_visited",
                           "dec.W_mask", "dec.W_k"})
    out.push_back({name, {d, d}});
  for (const char* name : {"dec.W_l", "dec.W_b", "dec.W_t"}) out.push_back({name, {1, d}});
  return out;
}

Policy::Policy(const PolicyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  Rng rng = make_rng(seed, "policy.init");
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.d_h));
  for (const auto& [name, shape] : layout(cfg_)) {
    Matrix m(shape.first, shape.second);
    const bool gain = name.ends_with(".gain");
    const bool ln_bias = name.ends_with("ln1.bias") || name.ends_with("ln2.bias");
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (gain) m[k] = 1.0;
      else if (ln_bias) m[k] = 0.0;
      else m[k] = uniform(rng, -bound, bound);
    }
    params_.add(name, std::move(m));
  }
}

Policy::Policy(const PolicyConfig& cfg, ad::ParameterStore params)
    : cfg_(cfg), params_(std::move(params)) {
  validate(cfg_);
  const auto expected = layout(cfg_);
  if (static_cast<int>(expected.size()) != params_.size())
    throw DataError("policy: parameter count " + std::to_string(params_.size()) +
                    " does not match the configuration (" + std::to_string(expected.size()) + ")");
  for (int i = 0; i < params_.size(); ++i) {
    const auto& [name, shape] = expected[i];
    const Matrix& m = params_.value(i);
    if (params_.name(i) != name || m.rows() != shape.first || m.cols() != shape.second)
      throw DataError("policy: parameter '" + params_.name(i) + "' " + m.shape_string() +
                      " does not match expected '" + name + "'");
  }
}

namespace {

// Row index permutation mapping edge (i, j) to (j, i); an involution.
std::vector<int> transpose_permutation(int n) {
  std::vector<int> perm(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) perm[a * n + b] = b * n + a;
  return perm;
}

Var affine_layernorm(Tape& t, Var x, const std::string& prefix) {
  return ad::add_row(ad::mul_row(ad::layernorm(x), t.param(prefix + ".gain")),
                     t.param(prefix + ".bias"));
}

}  // namespace

Var encode_nodes(Tape& t, const Policy& policy, const FeatureTensors& features) {
  const PolicyConfig& cfg = policy.config();
  const int n = features.nodes;
  if (n < 1) throw ContractViolation("encode: instance without nodes");
  const int edges = n * n;
  const int d = cfg.d_h;
  const int dk = d / cfg.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  const std::vector<int> perm = transpose_permutation(n);

  // Column attention must skip the key that duplicates the row block entry.
  Matrix mask(edges, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mask(i * n + j, n + i) = -std::numeric_limits<double>::infinity();

  Var x = t.constant(Matrix(edges, kEdgeInputDim, features.edge_inputs()));
  Var h = ad::add_row(ad::matmul(x, t.param("embed.W")), t.param("embed.b"));

  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Var q = ad::matmul(h, t.param(p + "Wq"));
    Var k = ad::matmul(h, t.param(p + "Wk"));
    Var v = ad::matmul(h, t.param(p + "Wv"));
    std::vector<Var> heads;
    for (int hd = 0; hd < cfg.heads; ++hd) {
      Var qh = ad::slice_cols(q, hd * dk, dk);
      Var kh = ad::slice_cols(k, hd * dk, dk);
      Var vh = ad::slice_cols(v, hd * dk, dk);
      // Row block i holds edges (i, *); in transposed order block j holds (*, j).
      Var s_row = ad::block_matmul_nt(qh, kh, n);
      Var s_col = ad::gather_rows(
          ad::block_matmul_nt(ad::gather_rows(qh, perm), ad::gather_rows(kh, perm), n), perm);
      Var att = ad::masked_softmax(ad::scale(ad::concat_cols({s_row, s_col}), inv_sqrt_dk), mask);
      Var o_row = ad::block_matmul(ad::slice_cols(att, 0, n), vh, n);
      Var o_col = ad::gather_rows(
          ad::block_matmul(ad::gather_rows(ad::slice_cols(att, n, n), perm),
                           ad::gather_rows(vh, perm), n),
          perm);
      heads.push_back(ad::add(o_row, o_col));
    }
    Var attn = ad::matmul(heads.size() == 1 ? heads[0] : ad::concat_cols(heads), t.param(p + "Wo"));
    Var h_tilde = affine_layernorm(t, ad::add(attn, h), p + "ln1");
    Var ff = ad::add_row(
        ad::matmul(ad::relu(ad::add_row(ad::matmul(h_tilde, t.param(p + "ff.W1")),
                                        t.param(p + "ff.b1"))),
                   t.param(p + "ff.W2")),
        t.param(p + "ff.b2"));
    h = affine_layernorm(t, ad::add(ff, h_tilde), p + "ln2");
  }

  // z_i = sum_j omega_ji h_ji with omega a softmax over the incoming edges of i.
  Var h_in = ad::gather_rows(h, perm);  // block i: edges (*, i)
  Var scores = ad::reshape(ad::matmul(h_in, t.param("agg.w")), n, n);
  Var omega = ad::softmax(scores);
  return ad::block_matmul(omega, h_in, n);
}

Encoded encode(Tape& t, const Policy& policy, const FeatureTensors& features) {
  Encoded enc;
  enc.nodes = features.nodes;
  enc.Z = encode_nodes(t, policy, features);
  enc.keys = ad::matmul(enc.Z, t.param("dec.W_k"));
  enc.graph = ad::matmul(ad::mean_rows(enc.Z), t.param("dec.W_graph"));
  enc.depot = ad::matmul(ad::slice_rows(enc.Z, 0, 1), t.param("dec.W_depot"));
  enc.current = ad::matmul(enc.Z, t.param("dec.W_curr"));
  enc.visited = ad::matmul(enc.Z, t.param("dec.W_visited"));
  enc.masked = ad::matmul(enc.Z, t.param("dec.W_mask"));
  return enc;
}

Var decode_step(Tape& t, const Policy& policy, const Encoded& enc, const Instance& inst,
                const FleetEpisodeState& s, const FeasibilityMask& mask) {
  const PolicyConfig& cfg = policy.config();
  const int n = enc.nodes;
  if (static_cast<int>(mask.allowed.size()) != n)
    throw ContractViolation("decode_step: mask length does not match the instance");
  if (!mask.any()) throw ContractViolation("decode_step: every action is masked");
  const VehicleState& v = s.vehicle;

  std::vector<int> visited{0};
  std::vector<int> blocked;
  for (int j = 0; j < n; ++j) {
    if (j != 0 && s.visited[j]) visited.push_back(j);
    if (!mask.allowed[j]) blocked.push_back(j);
  }

  Var c = ad::add(ad::slice_rows(enc.current, v.node, 1), enc.depot);
  c = ad::add(c, enc.graph);
  // Linear maps commute with the mean, so project first and average after.
  c = ad::add(c, ad::mean_rows(ad::gather_rows(enc.visited, visited)));
  if (!blocked.empty()) c = ad::add(c, ad::mean_rows(ad::gather_rows(enc.masked, blocked)));
  c = ad::add(c, ad::scale(t.param("dec.W_l"),
                           static_cast<double>(v.load) / inst.fleet.capacity));
  c = ad::add(c, ad::scale(t.param("dec.W_b"), v.soc));
  c = ad::add(c, ad::scale(t.param("dec.W_t"), v.clock / inst.horizon));

  Matrix penalty(1, n);
  for (int j = 0; j < n; ++j)
    penalty(0, j) = -cfg.lambda * inst.edges.energy(v.node, j) / inst.fleet.battery_kwh;
  Var u = ad::add_const(ad::scale(ad::matmul_nt(c, enc.keys),
                                  1.0 / std::sqrt(static_cast<double>(cfg.d_h))),
                        penalty);
  Var clipped = ad::scale(ad::tanh(ad::scale(u, 1.0 / cfg.kappa)), cfg.kappa);
  Matrix additive(1, n);
  for (int j = 0; j < n; ++j)
    if (!mask.allowed[j]) additive(0, j) = -std::numeric_limits<double>::infinity();
  return ad::masked_softmax(clipped, additive);
}

std::vector<double> action_probabilities(const Policy& policy, const Instance& inst,
                                         const FleetEpisodeState& s, const FeasibilityMask& mask) {
  Tape t(&policy.params(), false);
  const Encoded enc = encode(t, policy, normalize_features(inst));
  return decode_step(t, policy, enc, inst, s, mask).value().values();
}

RolloutResult rollout(Tape& t, const Policy& policy, const Encoded& enc, const Instance& inst,
                      const RolloutOptions& opt) {
  const Environment env(inst);
  NoiseSampler noise(opt.noise);
  Rng rng = make_rng(opt.seed, "policy.sample");
  FleetEpisodeState s = env.reset();
  RolloutResult out;
  std::vector<Var> log_terms;
  std::size_t step = 0;
  while (!s.terminal) {
    const FeasibilityMask mask = env.feasibility_mask(s);
    Var probs = decode_step(t, policy, enc, inst, s, mask);
    const Matrix& p = probs.value();
    int action = -1;
    if (step < opt.forced_actions.size()) {
      action = opt.forced_actions[step];
      if (action < 0 || action >= enc.nodes || !mask.allowed[action])
        throw UsageError("rollout: forced action " + std::to_string(action) + " at step " +
                         std::to_string(step) + " is not feasible");
    } else if (opt.mode == DecodeMode::Greedy) {
      for (int j = 0; j < enc.nodes; ++j)
        if (mask.allowed[j] && (action < 0 || p[j] > p[action])) action = j;
    } else {
      const double u = uniform01(rng);
      double acc = 0.0;
      for (int j = 0; j < enc.nodes; ++j) {
        if (!mask.allowed[j]) continue;
        action = j;
        acc += p[j];
        if (u < acc) break;
      }
    }
    Var lp = ad::log(ad::element(probs, 0, action));
    out.log_prob += lp.value()[0];
    log_terms.push_back(lp);
    out.actions.push_back(action);
    env.apply(s, action, &noise);
    ++step;
  }
  out.log_prob_var = log_terms.size() == 1 ? log_terms[0] : ad::sum(ad::concat_cols(log_terms));
  out.solution = make_solution(inst, s);
  return out;
}

RolloutResult rollout(const Policy& policy, const Instance& inst, const RolloutOptions& opt) {
  Tape t(&policy.params(), false);
  const Encoded enc = encode(t, policy, normalize_features(inst));
  RolloutResult r = rollout(t, policy, enc, inst, opt);
  r.log_prob_var = {};
  return r;
}

}  // namespace edarp
