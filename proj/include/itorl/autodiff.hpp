// Copyright 2026 The ItorL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace itorl::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named learnable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order and the
/// backward pass visits them in reverse. A tape built with `record = false`
/// only evaluates values.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m);
  /// Trainable leaf; backward() adds its gradient into `p.grad`.
  Var param(Parameter& p);
  /// Leaf holding the parameter's current value without gradient.
  Var frozen(const Parameter& p);
  /// While false, param() behaves like frozen().
  void set_params_trainable(bool on) { params_trainable_ = on; }
  bool params_trainable() const { return params_trainable_; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(const Var& loss);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of a node after backward(); zeros when it received none.
  Matrix grad(const Var& v) const;

  /// Hash of every branch taken by non-smooth ops (relu, minimum) so far.
  /// Two evaluations with equal signatures lie on the same smooth piece.
  std::uint64_t branch_signature() const { return branch_sig_; }
  template <typename Derived>
  void note_branches(const Eigen::ArrayBase<Derived>& taken) {
    for (Eigen::Index i = 0; i < taken.size(); ++i) {
      branch_sig_ = (branch_sig_ ^ (taken.derived().data()[i] ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL)) *
                    0x100000001b3ULL;
    }
  }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  const Matrix& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  /// Records an op result. `back` runs only when some input needs a gradient.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward back);
  Var push(Matrix value, const std::vector<Var>& inputs, Backward back);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward back;
    Parameter* param = nullptr;
  };

  bool record_;
  bool params_trainable_ = true;
  std::uint64_t branch_sig_ = 0xcbf29ce484222325ULL;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
/// x * W + b, with b a 1 x n row broadcast over rows.
Var linear(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Adds a constant matrix of the same shape.
Var add_const(const Var& a, const Matrix& c);
/// Multiplies elementwise by a constant matrix of the same shape.
Var mul_const(const Var& a, const Matrix& c);
/// Row-broadcast addition of a 1 x n row vector.
Var add_row(const Var& a, const Var& row);
Var relu(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var softplus(const Var& a);
Var minimum(const Var& a, const Var& b);
/// Row-wise softmax with max subtraction.
Var softmax_rows(const Var& a);
/// Row-wise layer normalization followed by gain and bias (1 x n each).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n);
/// Selects rows by index (rows may repeat).
Var gather_rows(const Var& a, const std::vector<int>& rows);
Var sum(const Var& a);
Var mean(const Var& a);
/// n x 1 column of row sums.
Var row_sum(const Var& a);

struct AttentionOutput {
  Var out;
  /// One rows x keys matrix per head.
  std::vector<Matrix> weights;
};

/// Multi-head scaled dot-product attention. `mask` is added to the logits
/// (0 to keep, -infinity to drop); every row must keep at least one key.
AttentionOutput multihead_attention(const Var& q, const Var& k, const Var& v, const Matrix& mask,
                                    int n_heads);

/// softmax(q k^T / sqrt(d_k)) for one query row against key rows.
Eigen::RowVectorXd attention_weights(const Eigen::RowVectorXd& q, const Matrix& keys);

}  // namespace itorl::ad
