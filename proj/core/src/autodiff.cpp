#include "edarp/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "edarp/error.hpp"

namespace edarp::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

// C (m x n) [+]= op(A) op(B) on raw row-major buffers.
void gemm_raw(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
              double* c, bool accumulate) {
  CMap A(a, ar, ac);
  CMap B(b, br, bc);
  const int m = ta ? ac : ar;
  const int n = tb ? br : bc;
  MMap C(c, m, n);
  if (!accumulate) C.setZero();
  if (!ta && !tb) C.noalias() += A * B;
  else if (ta && !tb) C.noalias() += A.transpose() * B;
  else if (!ta && tb) C.noalias() += A * B.transpose();
  else C.noalias() += A.transpose() * B.transpose();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ContractViolation(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                          b.shape_string());
}

Tape& tape_of(Var a) {
  if (!a.tape) throw ContractViolation("autodiff: variable without a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape || !a.tape) throw ContractViolation("autodiff: variables on different tapes");
  return *a.tape;
}

}  // namespace

// ---- Matrix ----

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw ContractViolation("Matrix: data size does not match shape");
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c,
          bool accumulate) {
  const int m = trans_a ? a.cols() : a.rows();
  const int k = trans_a ? a.rows() : a.cols();
  const int kb = trans_b ? b.cols() : b.rows();
  const int n = trans_b ? b.rows() : b.cols();
  if (k != kb) shape_error("gemm", a, b);
  if (c.rows() != m || c.cols() != n) {
    if (accumulate) throw ContractViolation("gemm: accumulator has the wrong shape");
    c = Matrix(m, n);
  }
  gemm_raw(a.data(), a.rows(), a.cols(), trans_a, b.data(), b.rows(), b.cols(), trans_b, c.data(),
           accumulate);
}

// ---- ParameterStore / Gradients ----

int ParameterStore::add(const std::string& name, Matrix value) {
  if (index_of(name) >= 0) throw ContractViolation("ParameterStore: duplicate name '" + name + "'");
  names_.push_back(name);
  values_.push_back(std::move(value));
  return size() - 1;
}

int ParameterStore::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += m.size();
  return n;
}

Gradients Gradients::zeros_like(const ParameterStore& params) {
  Gradients g;
  for (int i = 0; i < params.size(); ++i)
    g.grads.emplace_back(params.value(i).rows(), params.value(i).cols());
  return g;
}

void Gradients::add(const Gradients& other) {
  if (other.grads.size() != grads.size()) throw ContractViolation("Gradients: size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (std::size_t k = 0; k < grads[i].size(); ++k) grads[i][k] += other.grads[i][k];
}

void Gradients::scale(double s) {
  for (Matrix& g : grads)
    for (std::size_t k = 0; k < g.size(); ++k) g[k] *= s;
}

double Gradients::global_norm() const {
  double sq = 0.0;
  for (const Matrix& g : grads)
    for (std::size_t k = 0; k < g.size(); ++k) sq += g[k] * g[k];
  return std::sqrt(sq);
}

// ---- Tape ----

const Matrix& Var::value() const { return tape_of(*this).value(*this); }

Tape::Tape(const ParameterStore* params, bool track_params)
    : params_(params), track_params_(track_params) {
  if (params_) param_nodes_.assign(params_->size(), -1);
}

Var Tape::constant(Matrix value) {
  if (!value.all_finite()) throw NumericalError("autodiff: non-finite constant");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  Var v = constant(std::move(value));
  nodes_[v.id].needs_grad = true;
  return v;
}

Var Tape::param(int index) {
  if (!params_ || index < 0 || index >= params_->size())
    throw ContractViolation("Tape::param: unknown parameter index " + std::to_string(index));
  if (param_nodes_[index] >= 0) return {this, param_nodes_[index]};
  Node n;
  n.external = &params_->value(index);
  n.needs_grad = track_params_;
  n.param = index;
  nodes_.push_back(std::move(n));
  param_nodes_[index] = static_cast<int>(nodes_.size()) - 1;
  return {this, param_nodes_[index]};
}

Var Tape::param(const std::string& name) {
  const int index = params_ ? params_->index_of(name) : -1;
  if (index < 0) throw ContractViolation("Tape::param: unknown parameter '" + name + "'");
  return param(index);
}

const Matrix& Tape::value(Var v) const { return node_value(nodes_.at(v.id)); }

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.grad.empty()) return n.grad;
  const Matrix& val = node_value(n);
  return Matrix(val.rows(), val.cols());
}

Matrix& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Matrix& val = node_value(n);
    n.grad = Matrix(val.rows(), val.cols());
  }
  return n.grad;
}

Var Tape::record(Matrix value, std::vector<int> inputs, Backward back, const char* op) {
  if (!value.all_finite())
    throw NumericalError(std::string("autodiff: non-finite value produced by ") + op);
  Node n;
  n.value = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                             [this](int id) { return nodes_[id].needs_grad; });
  if (n.needs_grad) n.back = std::move(back);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractViolation("backward: loss lives on another tape");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ContractViolation("backward: loss must be a scalar, got " + lv.shape_string());
  for (Node& n : nodes_) n.grad = Matrix();
  grad_slot(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty() || !n.back) continue;
    n.back(*this, id, n.grad);
  }
  backward_done_ = true;
}

void Tape::accumulate(Gradients& out) const {
  if (!backward_done_) throw ContractViolation("accumulate: backward has not run");
  for (std::size_t p = 0; p < param_nodes_.size(); ++p) {
    const int id = param_nodes_[p];
    if (id < 0 || nodes_[id].grad.empty()) continue;
    Matrix& g = out.grads.at(p);
    const Matrix& src = nodes_[id].grad;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
  }
}

// ---- primitives ----

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Matrix out;
  gemm(A, false, B, false, out, false);
  return t.record(std::move(out), {a.id, b.id},
                  [ia = a.id, ib = b.id](Tape& tp, int, const Matrix& g) {
                    const Matrix& A = tp.value({&tp, ia});
                    const Matrix& B = tp.value({&tp, ib});
                    if (tp.wants(ia)) gemm(g, false, B, true, tp.grad_slot(ia), true);
                    if (tp.wants(ib)) gemm(A, true, g, false, tp.grad_slot(ib), true);
                  },
                  "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols() != B.cols()) shape_error("matmul_nt", A, B);
  Matrix out;
  gemm(A, false, B, true, out, false);
  return t.record(std::move(out), {a.id, b.id},
                  [ia = a.id, ib = b.id](Tape& tp, int, const Matrix& g) {
                    const Matrix& A = tp.value({&tp, ia});
                    const Matrix& B = tp.value({&tp, ib});
                    if (tp.wants(ia)) gemm(g, false, B, false, tp.grad_slot(ia), true);
                    if (tp.wants(ib)) gemm(g, true, A, false, tp.grad_slot(ib), true);
                  },
                  "matmul_nt");
}

namespace {

Var binary_same_shape(Var a, Var b, double sign_b, const char* op) {
  Tape& t = tape_of(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (!A.same_shape(B)) shape_error(op, A, B);
  Matrix out = A;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += sign_b * B[k];
  return t.record(std::move(out), {a.id, b.id},
                  [ia = a.id, ib = b.id, sign_b](Tape& tp, int, const Matrix& g) {
                    if (tp.wants(ia)) {
                      Matrix& ga = tp.grad_slot(ia);
                      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                    }
                    if (tp.wants(ib)) {
                      Matrix& gb = tp.grad_slot(ib);
                      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += sign_b * g[k];
                    }
                  },
                  op);
}

}  // namespace

Var add(Var a, Var b) { return binary_same_shape(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return binary_same_shape(a, b, -1.0, "sub"); }

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& A = a.value();
  const Matrix& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
  Matrix out = A;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) out(i, j) += R(0, j);
  return t.record(std::move(out), {a.id, row.id},
                  [ia = a.id, ir = row.id](Tape& tp, int, const Matrix& g) {
                    if (tp.wants(ia)) {
                      Matrix& ga = tp.grad_slot(ia);
                      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                    }
                    if (tp.wants(ir)) {
                      Matrix& gr = tp.grad_slot(ir);
                      for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
                    }
                  },
                  "add_row");
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Matrix out = A;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= B[k];
  return t.record(std::move(out), {a.id, b.id},
                  [ia = a.id, ib = b.id](Tape& tp, int, const Matrix& g) {
                    const Matrix& A = tp.value({&tp, ia});
                    const Matrix& B = tp.value({&tp, ib});
                    if (tp.wants(ia)) {
                      Matrix& ga = tp.grad_slot(ia);
                      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * B[k];
                    }
                    if (tp.wants(ib)) {
                      Matrix& gb = tp.grad_slot(ib);
                      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * A[k];
                    }
                  },
                  "mul");
}

Var mul_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& A = a.value();
  const Matrix& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("mul_row", A, R);
  Matrix out = A;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) out(i, j) *= R(0, j);
  return t.record(std::move(out), {a.id, row.id},
                  [ia = a.id, ir = row.id](Tape& tp, int, const Matrix& g) {
                    const Matrix& A = tp.value({&tp, ia});
                    const Matrix& R = tp.value({&tp, ir});
                    if (tp.wants(ia)) {
                      Matrix& ga = tp.grad_slot(ia);
                      for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * R(0, j);
                    }
                    if (tp.wants(ir)) {
                      Matrix& gr = tp.grad_slot(ir);
                      for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j) * A(i, j);
                    }
                  },
                  "mul_row");
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= s;
  return t.record(std::move(out), {a.id},
                  [ia = a.id, s](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += s * g[k];
                  },
                  "scale");
}

Var add_const(Var a, const Matrix& c) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  if (!A.same_shape(c)) shape_error("add_const", A, c);
  Matrix out = A;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += c[k];
  return t.record(std::move(out), {a.id},
                  [ia = a.id](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                  },
                  "add_const");
}

namespace {

// Elementwise op whose derivative is a function of input and output.
template <typename F, typename D>
Var unary(Var a, F f, D dfdx, const char* op) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(out[k]);
  return t.record(std::move(out), {a.id},
                  [ia = a.id, dfdx](Tape& tp, int self, const Matrix& g) {
                    const Matrix& x = tp.value({&tp, ia});
                    const Matrix& y = tp.value({&tp, self});
                    Matrix& ga = tp.grad_slot(ia);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * dfdx(x[k], y[k]);
                  },
                  op);
}

}  // namespace

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }, "relu");
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; }, "log");
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; }, "exp");
}

Var masked_softmax(Var a, const Matrix& mask) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  if (!A.same_shape(mask)) shape_error("masked_softmax", A, mask);
  Matrix out(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < A.cols(); ++j)
      if (mask(i, j) == 0.0) m = std::max(m, A(i, j));
    if (m == -std::numeric_limits<double>::infinity())
      throw ContractViolation("masked_softmax: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (int j = 0; j < A.cols(); ++j) {
      if (mask(i, j) != 0.0) continue;
      out(i, j) = std::exp(A(i, j) - m);
      z += out(i, j);
    }
    for (int j = 0; j < A.cols(); ++j) out(i, j) /= z;
  }
  return t.record(std::move(out), {a.id},
                  [ia = a.id](Tape& tp, int self, const Matrix& g) {
                    const Matrix& p = tp.value({&tp, self});
                    Matrix& ga = tp.grad_slot(ia);
                    for (int i = 0; i < p.rows(); ++i) {
                      double dot = 0.0;
                      for (int j = 0; j < p.cols(); ++j) dot += p(i, j) * g(i, j);
                      for (int j = 0; j < p.cols(); ++j) ga(i, j) += p(i, j) * (g(i, j) - dot);
                    }
                  },
                  "masked_softmax");
}

Var softmax(Var a) { return masked_softmax(a, Matrix(a.rows(), a.cols())); }

Var layernorm(Var a, double eps) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  const int r = A.rows(), c = A.cols();
  Matrix out(r, c);
  std::vector<double> inv_std(r);
  for (int i = 0; i < r; ++i) {
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += A(i, j);
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (A(i, j) - mu) * (A(i, j) - mu);
    var /= c;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j) out(i, j) = (A(i, j) - mu) * inv_std[i];
  }
  return t.record(std::move(out), {a.id},
                  [ia = a.id, inv_std = std::move(inv_std)](Tape& tp, int self, const Matrix& g) {
                    const Matrix& y = tp.value({&tp, self});
                    Matrix& ga = tp.grad_slot(ia);
                    const int c = y.cols();
                    for (int i = 0; i < y.rows(); ++i) {
                      double mg = 0.0, mgy = 0.0;
                      for (int j = 0; j < c; ++j) {
                        mg += g(i, j);
                        mgy += g(i, j) * y(i, j);
                      }
                      mg /= c;
                      mgy /= c;
                      for (int j = 0; j < c; ++j)
                        ga(i, j) += inv_std[i] * (g(i, j) - mg - y(i, j) * mgy);
                    }
                  },
                  "layernorm");
}

Var mean_rows(Var a) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  if (A.rows() == 0) throw ContractViolation("mean_rows: empty input");
  Matrix out(1, A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) out(0, j) += A(i, j);
  for (int j = 0; j < A.cols(); ++j) out(0, j) /= A.rows();
  return t.record(std::move(out), {a.id},
                  [ia = a.id](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    const double inv = 1.0 / ga.rows();
                    for (int i = 0; i < ga.rows(); ++i)
                      for (int j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
                  },
                  "mean_rows");
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  double s = 0.0;
  for (std::size_t k = 0; k < A.size(); ++k) s += A[k];
  return t.record(Matrix::scalar(s), {a.id},
                  [ia = a.id](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0];
                  },
                  "sum");
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  Matrix out(static_cast<int>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows())
      throw ContractViolation("gather_rows: row index out of range");
    std::copy_n(&A(rows[i], 0), A.cols(), &out(static_cast<int>(i), 0));
  }
  return t.record(std::move(out), {a.id},
                  [ia = a.id, rows](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (std::size_t i = 0; i < rows.size(); ++i)
                      for (int j = 0; j < g.cols(); ++j) ga(rows[i], j) += g(static_cast<int>(i), j);
                  },
                  "gather_rows");
}

Var slice_rows(Var a, int start, int count) {
  const Matrix& A = a.value();
  if (start < 0 || count < 0 || start + count > A.rows())
    throw ContractViolation("slice_rows: range out of bounds for " + A.shape_string());
  Tape& t = tape_of(a);
  Matrix out(count, A.cols());
  std::copy_n(A.data() + static_cast<std::size_t>(start) * A.cols(), out.size(), out.data());
  return t.record(std::move(out), {a.id},
                  [ia = a.id, start](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    double* dst = ga.data() + static_cast<std::size_t>(start) * ga.cols();
                    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
                  },
                  "slice_rows");
}

Var slice_cols(Var a, int start, int count) {
  const Matrix& A = a.value();
  if (start < 0 || count < 0 || start + count > A.cols())
    throw ContractViolation("slice_cols: range out of bounds for " + A.shape_string());
  Tape& t = tape_of(a);
  Matrix out(A.rows(), count);
  for (int i = 0; i < A.rows(); ++i) std::copy_n(&A(i, start), count, &out(i, 0));
  return t.record(std::move(out), {a.id},
                  [ia = a.id, start](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (int i = 0; i < g.rows(); ++i)
                      for (int j = 0; j < g.cols(); ++j) ga(i, start + j) += g(i, j);
                  },
                  "slice_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const int cols = parts[0].cols();
  int rows = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    tape_of(parts[0], p);
    if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
    rows += p.rows();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    std::copy_n(v.data(), v.size(), out.data() + off);
    off += v.size();
  }
  return t.record(std::move(out), ids,
                  [ids](Tape& tp, int, const Matrix& g) {
                    std::size_t off = 0;
                    for (int id : ids) {
                      const std::size_t n = tp.value({&tp, id}).size();
                      if (tp.wants(id)) {
                        Matrix& gi = tp.grad_slot(id);
                        for (std::size_t k = 0; k < n; ++k) gi[k] += g[off + k];
                      }
                      off += n;
                    }
                  },
                  "concat_rows");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const int rows = parts[0].rows();
  int cols = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    tape_of(parts[0], p);
    if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    for (int i = 0; i < rows; ++i) std::copy_n(&v(i, 0), v.cols(), &out(i, off));
    off += v.cols();
  }
  return t.record(std::move(out), ids,
                  [ids](Tape& tp, int, const Matrix& g) {
                    int off = 0;
                    for (int id : ids) {
                      const int c = tp.value({&tp, id}).cols();
                      if (tp.wants(id)) {
                        Matrix& gi = tp.grad_slot(id);
                        for (int i = 0; i < g.rows(); ++i)
                          for (int j = 0; j < c; ++j) gi(i, j) += g(i, off + j);
                      }
                      off += c;
                    }
                  },
                  "concat_cols");
}

Var reshape(Var a, int rows, int cols) {
  const Matrix& A = a.value();
  if (static_cast<std::size_t>(rows) * cols != A.size())
    throw ContractViolation("reshape: cannot view " + A.shape_string() + " as (" +
                            std::to_string(rows) + "x" + std::to_string(cols) + ")");
  Tape& t = tape_of(a);
  return t.record(Matrix(rows, cols, A.values()), {a.id},
                  [ia = a.id](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                  },
                  "reshape");
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Matrix& A = a.value();
  Matrix out(A.cols(), A.rows());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
  return t.record(std::move(out), {a.id},
                  [ia = a.id](Tape& tp, int, const Matrix& g) {
                    Matrix& ga = tp.grad_slot(ia);
                    for (int i = 0; i < ga.rows(); ++i)
                      for (int j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
                  },
                  "transpose");
}

Var element(Var a, int r, int c) {
  const Matrix& A = a.value();
  if (r < 0 || r >= A.rows() || c < 0 || c >= A.cols())
    throw ContractViolation("element: index out of range for " + A.shape_string());
  Tape& t = tape_of(a);
  return t.record(Matrix::scalar(A(r, c)), {a.id},
                  [ia = a.id, r, c](Tape& tp, int, const Matrix& g) {
                    tp.grad_slot(ia)(r, c) += g[0];
                  },
                  "element");
}

Var block_matmul(Var a, Var b, int blocks) {
  Tape& t = tape_of(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (blocks < 1 || A.rows() % blocks || B.rows() % blocks) shape_error("block_matmul", A, B);
  const int p = A.rows() / blocks, q = A.cols(), r = B.cols();
  if (B.rows() / blocks != q) shape_error("block_matmul", A, B);
  Matrix out(blocks * p, r);
  for (int k = 0; k < blocks; ++k)
    gemm_raw(A.data() + static_cast<std::size_t>(k) * p * q, p, q, false,
             B.data() + static_cast<std::size_t>(k) * q * r, q, r, false,
             out.data() + static_cast<std::size_t>(k) * p * r, false);
  return t.record(std::move(out), {a.id, b.id},
                  [ia = a.id, ib = b.id, blocks, p, q, r](Tape& tp, int, const Matrix& g) {
                    const Matrix& A = tp.value({&tp, ia});
                    const Matrix& B = tp.value({&tp, ib});
                    for (int k = 0; k < blocks; ++k) {
                      const double* gk = g.data() + static_cast<std::size_t>(k) * p * r;
                      if (tp.wants(ia))
                        gemm_raw(gk, p, r, false, B.data() + static_cast<std::size_t>(k) * q * r, q,
                                 r, true, tp.grad_slot(ia).data() + static_cast<std::size_t>(k) * p * q,
                                 true);
                      if (tp.wants(ib))
                        gemm_raw(A.data() + static_cast<std::size_t>(k) * p * q, p, q, true, gk, p,
                                 r, false, tp.grad_slot(ib).data() + static_cast<std::size_t>(k) * q * r,
                                 true);
                    }
                  },
                  "block_matmul");
}

Var block_matmul_nt(Var a, Var b, int blocks) {
  Tape& t = tape_of(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (blocks < 1 || A.rows() % blocks || B.rows() % blocks || A.cols() != B.cols())
    shape_error("block_matmul_nt", A, B);
  const int p = A.rows() / blocks, q = B.rows() / blocks, kd = A.cols();
  Matrix out(blocks * p, q);
  for (int k = 0; k < blocks; ++k)
    gemm_raw(A.data() + static_cast<std::size_t>(k) * p * kd, p, kd, false,
             B.data() + static_cast<std::size_t>(k) * q * kd, q, kd, true,
             out.data() + static_cast<std::size_t>(k) * p * q, false);
  return t.record(std::move(out), {a.id, b.id},
                  [ia = a.id, ib = b.id, blocks, p, q, kd](Tape& tp, int, const Matrix& g) {
                    const Matrix& A = tp.value({&tp, ia});
                    const Matrix& B = tp.value({&tp, ib});
                    for (int k = 0; k < blocks; ++k) {
                      const double* gk = g.data() + static_cast<std::size_t>(k) * p * q;
                      if (tp.wants(ia))
                        gemm_raw(gk, p, q, false, B.data() + static_cast<std::size_t>(k) * q * kd, q,
                                 kd, false,
                                 tp.grad_slot(ia).data() + static_cast<std::size_t>(k) * p * kd, true);
                      if (tp.wants(ib))
                        gemm_raw(gk, p, q, true, A.data() + static_cast<std::size_t>(k) * p * kd, p,
                                 kd, false,
                                 tp.grad_slot(ib).data() + static_cast<std::size_t>(k) * q * kd, true);
                    }
                  },
                  "block_matmul_nt");
}

}  // namespace edarp::ad
