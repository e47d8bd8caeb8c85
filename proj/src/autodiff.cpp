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

#include "itorl/autodiff.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>

#include "itorl/errors.hpp"

namespace itorl::ad {

Var Tape::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  if (!params_trainable_) return frozen(p);
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.needs_grad = record_;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_[&p] = id;
  return Var(this, id);
}

Var Tape::frozen(const Parameter& p) { return constant(p.value); }

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward back) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const auto& in : inputs) {
      if (in.tape() != this) throw ShapeError("autodiff: operands recorded on different tapes");
      if (nodes_[static_cast<std::size_t>(in.id())].needs_grad) n.needs_grad = true;
    }
    if (n.needs_grad) n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, const std::vector<Var>& inputs, Backward back) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const auto& in : inputs) {
      if (in.tape() != this) throw ShapeError("autodiff: operands recorded on different tapes");
      if (nodes_[static_cast<std::size_t>(in.id())].needs_grad) n.needs_grad = true;
    }
    if (n.needs_grad) n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(const Var& loss) {
  if (!record_) throw NumericError("backward: tape was not recording");
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!std::isfinite(loss.value()(0, 0))) throw NumericError("backward: non-finite loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[static_cast<std::size_t>(loss.id())].grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.back) n.back(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Matrix Tape::grad(const Var& v) const {
  const auto& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string("autodiff ") + op + ": shape mismatch");
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("autodiff matmul: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("autodiff matmul_nt: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() * b.value().transpose(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("autodiff linear: shape mismatch");
  }
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  const int ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape()->push(std::move(out), {x, w, b}, [ix, iw, ib](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.needs_grad(ix)) t.accumulate(ix, g * t.value(iw).transpose());
    if (t.needs_grad(iw)) t.accumulate(iw, t.value(ix).transpose() * g);
    if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self));
    t.accumulate(ib, t.grad_of(self));
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self));
    t.accumulate(ib, -t.grad_of(self));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value() * s, {a},
                        [ia, s](Tape& t, int self) { t.accumulate(ia, t.grad_of(self) * s); });
}

Var add_scalar(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push((a.value().array() + s).matrix(), {a},
                        [ia](Tape& t, int self) { t.accumulate(ia, t.grad_of(self)); });
}

Var add_const(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("autodiff add_const: shape mismatch");
  const int ia = a.id();
  return a.tape()->push(a.value() + c, {a},
                        [ia](Tape& t, int self) { t.accumulate(ia, t.grad_of(self)); });
}

Var mul_const(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("autodiff mul_const: shape mismatch");
  const int ia = a.id();
  return a.tape()->push(a.value().cwiseProduct(c), {a}, [ia, c](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self).cwiseProduct(c));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("autodiff add_row: shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  const int ia = a.id(), ir = row.id();
  return a.tape()->push(std::move(out), {a, row}, [ia, ir](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self));
    if (t.needs_grad(ir)) t.accumulate(ir, t.grad_of(self).colwise().sum());
  });
}

Var relu(const Var& a) {
  const int ia = a.id();
  a.tape()->note_branches((a.value().array() > 0.0).eval());
  return a.tape()->push(a.value().cwiseMax(0.0), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, (t.value(ia).array() > 0.0).select(t.grad_of(self), 0.0));
  });
}

Var tanh(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().tanh().matrix(), {a}, [ia](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.accumulate(ia, (t.grad_of(self).array() * (1.0 - y * y)).matrix());
  });
}

Var exp(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().exp().matrix(), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad_of(self).cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().log().matrix(), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, (t.grad_of(self).array() / t.value(ia).array()).matrix());
  });
}

Var square(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().square().matrix(), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, (2.0 * t.grad_of(self).array() * t.value(ia).array()).matrix());
  });
}

Var softplus(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return a.tape()->push(std::move(out), {a}, [ia](Tape& t, int self) {
    const Matrix sig = t.value(ia).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    t.accumulate(ia, t.grad_of(self).cwiseProduct(sig));
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape(a, b, "minimum");
  const int ia = a.id(), ib = b.id();
  a.tape()->note_branches((a.value().array() <= b.value().array()).eval());
  return a.tape()->push(a.value().cwiseMin(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const auto pick_a = (t.value(ia).array() <= t.value(ib).array());
    t.accumulate(ia, pick_a.select(t.grad_of(self), 0.0));
    t.accumulate(ib, pick_a.select(0.0, t.grad_of(self)));
  });
}

namespace {

Matrix softmax_values(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

// dL/dx for y = softmax(x) row-wise.
Matrix softmax_backward(const Matrix& y, const Matrix& g) {
  const Eigen::VectorXd dots = (g.cwiseProduct(y)).rowwise().sum();
  Matrix out = g;
  out.colwise() -= dots;
  return out.cwiseProduct(y);
}

}  // namespace

Var softmax_rows(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(softmax_values(a.value()), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, softmax_backward(t.value(self), t.grad_of(self)));
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw ShapeError("autodiff layer_norm: gain/bias shape mismatch");
  }
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape()->push(std::move(out), {x, gain, bias},
                        [ix, ig, ib, xhat, inv_std, n](Tape& t, int self) {
                          const Matrix& g = t.grad_of(self);
                          if (t.needs_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                          if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
                          if (!t.needs_grad(ix)) return;
                          const Matrix gh = g.array().rowwise() * t.value(ig).row(0).array();
                          Matrix gx(g.rows(), n);
                          for (Eigen::Index r = 0; r < g.rows(); ++r) {
                            const double m1 = gh.row(r).mean();
                            const double m2 = gh.row(r).cwiseProduct(xhat.row(r)).mean();
                            gx.row(r) = inv_std(r) * (gh.row(r).array() - m1 - xhat.row(r).array() * m2);
                          }
                          t.accumulate(ix, gx);
                        });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("autodiff concat_cols: no operands");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("autodiff concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), c);
    c += p.cols();
  }
  return parts.front().tape()->push(std::move(out), parts, [spans](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    for (const auto& [id, start] : spans) {
      if (t.needs_grad(id)) t.accumulate(id, g.middleCols(start, t.value(id).cols()));
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols()) throw ShapeError("autodiff slice_cols: out of range");
  const int ia = a.id();
  return a.tape()->push(a.value().middleCols(start, n), {a}, [ia, start, n](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.middleCols(start, n) = t.grad_of(self);
    t.accumulate(ia, g);
  });
}

Var gather_rows(const Var& a, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ShapeError("autodiff gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  const int ia = a.id();
  return a.tape()->push(std::move(out), {a}, [ia, rows](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    const Matrix& gs = t.grad_of(self);
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += gs.row(static_cast<Eigen::Index>(i));
    t.accumulate(ia, g);
  });
}

Var sum(const Var& a) {
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), {a}, [ia](Tape& t, int self) {
    const double g = t.grad_of(self)(0, 0);
    t.accumulate(ia, Matrix::Constant(t.value(ia).rows(), t.value(ia).cols(), g));
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().rowwise().sum(), {a}, [ia](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix out(t.value(ia).rows(), t.value(ia).cols());
    out.colwise() = g.col(0);
    t.accumulate(ia, out);
  });
}

namespace {

// Rows sharing one contiguous block of admissible keys.
struct KeyGroup {
  Eigen::Index lo = 0;
  Eigen::Index len = 0;
  std::vector<Eigen::Index> rows;
};

std::vector<KeyGroup> key_groups(const Matrix& mask) {
  std::vector<KeyGroup> groups;
  std::map<std::pair<Eigen::Index, Eigen::Index>, std::size_t> index;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    Eigen::Index lo = -1, hi = -1;
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (std::isfinite(mask(r, c))) {
        if (lo < 0) lo = c;
        hi = c;
      }
    }
    if (lo < 0) throw InputError("attention: a query row has no admissible key");
    const auto key = std::make_pair(lo, hi);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({lo, hi - lo + 1, {}});
    }
    groups[it->second].rows.push_back(r);
  }
  return groups;
}

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& rows, Eigen::Index col, Eigen::Index n) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]).segment(col, n);
  return out;
}

}  // namespace

AttentionOutput multihead_attention(const Var& q, const Var& k, const Var& v, const Matrix& mask,
                                    int n_heads) {
  const Eigen::Index d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw ShapeError("attention: query/key/value widths or key/value rows differ");
  }
  if (k.rows() == 0) throw ShapeError("attention: no keys");
  if (mask.rows() != q.rows() || mask.cols() != k.rows()) throw ShapeError("attention: mask shape");
  if (n_heads <= 0 || d % n_heads != 0) throw ShapeError("attention: width not divisible by heads");
  const Eigen::Index dk = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  // Keys outside a row's admissible block get exactly zero weight, so only
  // the block is evaluated; -infinity inside a block is still honored.
  auto groups = std::make_shared<std::vector<KeyGroup>>(key_groups(mask));

  AttentionOutput result;
  Matrix out(q.rows(), d);
  auto block_weights = std::make_shared<std::vector<Matrix>>();  // [head * groups + g]
  for (int h = 0; h < n_heads; ++h) {
    Matrix w_full = Matrix::Zero(q.rows(), k.rows());
    for (const auto& g : *groups) {
      const Matrix qg = gather(q.value(), g.rows, h * dk, dk);
      Matrix logits = qg * k.value().block(g.lo, h * dk, g.len, dk).transpose();
      logits *= inv_sqrt;
      for (std::size_t i = 0; i < g.rows.size(); ++i) {
        logits.row(static_cast<Eigen::Index>(i)) += mask.row(g.rows[i]).segment(g.lo, g.len);
      }
      Matrix w = softmax_values(logits);
      const Matrix og = w * v.value().block(g.lo, h * dk, g.len, dk);
      for (std::size_t i = 0; i < g.rows.size(); ++i) {
        out.row(g.rows[i]).segment(h * dk, dk) = og.row(static_cast<Eigen::Index>(i));
        w_full.row(g.rows[i]).segment(g.lo, g.len) = w.row(static_cast<Eigen::Index>(i));
      }
      block_weights->push_back(std::move(w));
    }
    result.weights.push_back(std::move(w_full));
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  result.out = q.tape()->push(
      std::move(out), {q, k, v},
      [iq, ik, iv, n_heads, dk, inv_sqrt, groups, block_weights](Tape& t, int self) {
        const Matrix& g = t.grad_of(self);
        const Matrix& qv = t.value(iq);
        const Matrix& kv = t.value(ik);
        const Matrix& vv = t.value(iv);
        Matrix gq = Matrix::Zero(qv.rows(), qv.cols());
        Matrix gk = Matrix::Zero(kv.rows(), kv.cols());
        Matrix gv = Matrix::Zero(vv.rows(), vv.cols());
        std::size_t b = 0;
        for (int h = 0; h < n_heads; ++h) {
          for (const auto& grp : *groups) {
            const Matrix& w = (*block_weights)[b++];
            const Matrix gh = gather(g, grp.rows, h * dk, dk);
            const Matrix qg = gather(qv, grp.rows, h * dk, dk);
            gv.block(grp.lo, h * dk, grp.len, dk) += w.transpose() * gh;
            const Matrix gw = gh * vv.block(grp.lo, h * dk, grp.len, dk).transpose();
            const Matrix gl = softmax_backward(w, gw) * inv_sqrt;
            const Matrix gqg = gl * kv.block(grp.lo, h * dk, grp.len, dk);
            for (std::size_t i = 0; i < grp.rows.size(); ++i) {
              gq.row(grp.rows[i]).segment(h * dk, dk) += gqg.row(static_cast<Eigen::Index>(i));
            }
            gk.block(grp.lo, h * dk, grp.len, dk) += gl.transpose() * qg;
          }
        }
        t.accumulate(iq, gq);
        t.accumulate(ik, gk);
        t.accumulate(iv, gv);
      });
  return result;
}

Eigen::RowVectorXd attention_weights(const Eigen::RowVectorXd& q, const Matrix& keys) {
  if (keys.rows() == 0) throw InputError("attention_weights: empty key set");
  if (keys.cols() != q.cols()) throw ShapeError("attention_weights: query/key width mismatch");
  Eigen::RowVectorXd logits = (keys * q.transpose()).transpose();
  logits /= std::sqrt(static_cast<double>(q.cols()));
  const double m = logits.maxCoeff();
  Eigen::RowVectorXd w = (logits.array() - m).exp();
  return w / w.sum();
}

}  // namespace itorl::ad
