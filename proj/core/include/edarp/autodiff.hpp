#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace edarp::ad {

// Dense row-major matrix of doubles. Vectors are 1 x n.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const double& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// C = A * B (+= when accumulate).
void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c,
          bool accumulate);

// Named trainable tensors in a fixed order.
class ParameterStore {
 public:
  int add(const std::string& name, Matrix value);
  int index_of(const std::string& name) const;  // -1 when absent
  int size() const { return static_cast<int>(values_.size()); }
  const std::string& name(int i) const { return names_[i]; }
  const Matrix& value(int i) const { return values_[i]; }
  Matrix& value(int i) { return values_[i]; }
  std::size_t scalar_count() const;

  bool operator==(const ParameterStore&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

// Gradient accumulator aligned with a ParameterStore.
struct Gradients {
  std::vector<Matrix> grads;

  static Gradients zeros_like(const ParameterStore& params);
  void add(const Gradients& other);
  void scale(double s);
  double global_norm() const;
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
};

// Define-by-run reverse-mode tape. Single owner; build one per rollout.
class Tape {
 public:
  // With track_params false, parameter leaves take no gradient and no
  // backward closures are kept (inference).
  explicit Tape(const ParameterStore* params = nullptr, bool track_params = true);

  Var constant(Matrix value);
  // Leaf that receives a gradient; for tests and inputs of interest.
  Var variable(Matrix value);
  // Leaf bound to parameter `index`; repeated calls return the same node.
  Var param(int index);
  Var param(const std::string& name);

  const Matrix& value(Var v) const;
  // Gradient of the last backward() target; zeros when the node got none.
  Matrix grad(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  void backward(Var loss);
  // Adds parameter gradients from the last backward() into `out`.
  void accumulate(Gradients& out) const;

  std::size_t node_count() const { return nodes_.size(); }

  // Records an op. `inputs` decide needs_grad; `back` receives the node id and
  // its gradient and adds into the inputs' gradients through grad_slot.
  using Backward = std::function<void(Tape&, int self, const Matrix& out_grad)>;
  Var record(Matrix value, std::vector<int> inputs, Backward back, const char* op);
  Matrix& grad_slot(int id);  // allocates zeros on first use
  bool wants(int id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool needs_grad = false;
    int param = -1;
    std::vector<int> inputs;
    Backward back;
  };
  const Matrix& node_value(const Node& n) const { return n.external ? *n.external : n.value; }

  const ParameterStore* params_;
  bool track_params_ = true;
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
  bool backward_done_ = false;
};

// ---- primitives ----

Var matmul(Var a, Var b);                 // a * b
Var matmul_nt(Var a, Var b);              // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);              // row (1 x c) broadcast over rows of a
Var mul(Var a, Var b);                    // elementwise
Var mul_row(Var a, Var row);              // row (1 x c) broadcast, elementwise
Var scale(Var a, double s);
Var add_const(Var a, const Matrix& c);    // c same shape as a
Var relu(Var a);
Var tanh(Var a);
Var log(Var a);
Var exp(Var a);
// Row-wise softmax with an additive mask of 0 / -inf entries; masked outputs
// are exactly 0. Every row needs at least one unmasked entry.
Var masked_softmax(Var a, const Matrix& mask);
Var softmax(Var a);
Var layernorm(Var a, double eps = 1e-5);  // row-wise, no affine
Var mean_rows(Var a);                     // 1 x c
Var sum(Var a);                           // 1 x 1
Var gather_rows(Var a, const std::vector<int>& rows);
Var slice_rows(Var a, int start, int count);
Var slice_cols(Var a, int start, int count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var reshape(Var a, int rows, int cols);
Var transpose(Var a);
Var element(Var a, int r, int c);         // 1 x 1
// Block-diagonal products over `blocks` equal row blocks:
// block_matmul:    A (blocks*p x q), B (blocks*q x r) -> blocks*p x r, A_b B_b
// block_matmul_nt: A (blocks*p x k), B (blocks*q x k) -> blocks*p x q, A_b B_b^T
Var block_matmul(Var a, Var b, int blocks);
Var block_matmul_nt(Var a, Var b, int blocks);

}  // namespace edarp::ad
