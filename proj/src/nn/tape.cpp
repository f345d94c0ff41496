// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "svodrive/error.hpp"
#include "svodrive/nn/tensor.hpp"

namespace svo::nn {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, int)> backward_fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = push(p.value, true, nullptr);
  nodes_.back().param = &p;
  bound_[&p] = v.id();
  return v;
}

Matrix& Tape::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw StructuralError("root belongs to a different tape");
  if (root.rows() != 1 || root.cols() != 1) throw StructuralError("backward requires a scalar (1x1) root");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[static_cast<std::size_t>(root.id())].needs_grad) return;
  grad_ref(root.id()).setConstant(1.0);
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      Parameter& p = *n.param;
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
        p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
      p.grad += nodes_[static_cast<std::size_t>(i)].grad;
    }
  }
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw StructuralError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw StructuralError("operands on different tapes");
  return *a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows())
    throw StructuralError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + ")");
  const int ia = a.id(), ib = b.id();
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (ga) tp.grad_ref(ia).noalias() += g * tp.value(ib).transpose();
    if (gb) tp.grad_ref(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.push(a.value() + b.value(), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    if (ga) tp.grad_ref(ia) += tp.grad(self);
    if (gb) tp.grad_ref(ib) += tp.grad(self);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.push(a.value() - b.value(), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    if (ga) tp.grad_ref(ia) += tp.grad(self);
    if (gb) tp.grad_ref(ib) -= tp.grad(self);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.push(a.value().cwiseProduct(b.value()), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    if (ga) tp.grad_ref(ia) += tp.grad(self).cwiseProduct(tp.value(ib));
    if (gb) tp.grad_ref(ib) += tp.grad(self).cwiseProduct(tp.value(ia));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value() * s, t.needs_grad(a), [ia, s](Tape& tp, int self) { tp.grad_ref(ia) += tp.grad(self) * s; });
}

Var add_scalar(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push((a.value().array() + s).matrix(), t.needs_grad(a),
                [ia](Tape& tp, int self) { tp.grad_ref(ia) += tp.grad(self); });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw StructuralError("add_row: row must be 1 x cols(a)");
  const int ia = a.id(), ib = row.id();
  const bool ga = t.needs_grad(a), gb = t.needs_grad(row);
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.push(std::move(out), ga || gb, [ia, ib, ga, gb](Tape& tp, int self) {
    if (ga) tp.grad_ref(ia) += tp.grad(self);
    if (gb) tp.grad_ref(ib) += tp.grad(self).colwise().sum();
  });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().cwiseMax(0.0), t.needs_grad(a), [ia](Tape& tp, int self) {
    tp.grad_ref(ia) += (tp.value(ia).array() > 0.0).select(tp.grad(self), 0.0).matrix();
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().array().tanh().matrix(), t.needs_grad(a), [ia](Tape& tp, int self) {
    const auto& y = tp.value(self).array();
    tp.grad_ref(ia).array() += tp.grad(self).array() * (1.0 - y * y);
  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().array().exp().matrix(), t.needs_grad(a), [ia](Tape& tp, int self) {
    tp.grad_ref(ia).array() += tp.grad(self).array() * tp.value(self).array();
  });
}

Var log(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().array().log().matrix(), t.needs_grad(a), [ia](Tape& tp, int self) {
    tp.grad_ref(ia).array() += tp.grad(self).array() / tp.value(ia).array();
  });
}

Var square(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().array().square().matrix(), t.needs_grad(a), [ia](Tape& tp, int self) {
    tp.grad_ref(ia).array() += 2.0 * tp.grad(self).array() * tp.value(ia).array();
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().cwiseMax(lo).cwiseMin(hi), t.needs_grad(a), [ia, lo, hi](Tape& tp, int self) {
    const auto& x = tp.value(ia).array();
    tp.grad_ref(ia).array() += ((x >= lo) && (x <= hi)).select(tp.grad(self).array(), 0.0);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), t.needs_grad(a),
                [ia](Tape& tp, int self) { tp.grad_ref(ia).array() += tp.grad(self)(0, 0); });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw StructuralError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix out = a.value().rowwise().sum();
  return t.push(std::move(out), t.needs_grad(a), [ia](Tape& tp, int self) {
    Matrix& g = tp.grad_ref(ia);
    g.colwise() += tp.grad(self).col(0);
  });
}

Var detach(Var a) { return a.tape()->constant(a.value()); }

Var segment_sum(Var a, const Segments& seg) {
  Tape& t = *a.tape();
  if (seg.total() != a.rows()) throw StructuralError("segment_sum: segments do not cover the rows");
  const int ia = a.id();
  Matrix out = Matrix::Zero(seg.count(), a.cols());
  for (int g = 0; g < seg.count(); ++g)
    for (int r = seg.begin(g); r < seg.begin(g) + seg.size(g); ++r) out.row(g) += a.value().row(r);
  return t.push(std::move(out), t.needs_grad(a), [ia, seg](Tape& tp, int self) {
    Matrix& g = tp.grad_ref(ia);
    const Matrix& go = tp.grad(self);
    for (int s = 0; s < seg.count(); ++s)
      for (int r = seg.begin(s); r < seg.begin(s) + seg.size(s); ++r) g.row(r) += go.row(s);
  });
}

Var gather_rows(Var a, std::span<const int> rows) {
  Tape& t = *a.tape();
  const int ia = a.id();
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= a.rows()) throw StructuralError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  }
  return t.push(std::move(out), t.needs_grad(a), [ia, idx = std::move(idx)](Tape& tp, int self) {
    Matrix& g = tp.grad_ref(ia);
    const Matrix& go = tp.grad(self);
    for (std::size_t r = 0; r < idx.size(); ++r) g.row(idx[r]) += go.row(static_cast<Eigen::Index>(r));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw StructuralError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool ng = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw StructuralError("concat_cols: operands on different tapes");
    if (p.rows() != rows) throw StructuralError("concat_cols: row counts differ");
    cols += p.cols();
    ng = ng || t.needs_grad(p);
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.push(std::move(out), ng, [ids, widths](Tape& tp, int self) {
    Eigen::Index c0 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(Var(&tp, ids[k]))) tp.grad_ref(ids[k]) += tp.grad(self).middleCols(c0, widths[k]);
      c0 += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw StructuralError("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool ng = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw StructuralError("concat_rows: operands on different tapes");
    if (p.cols() != cols) throw StructuralError("concat_rows: column counts differ");
    rows += p.rows();
    ng = ng || t.needs_grad(p);
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.push(std::move(out), ng, [ids, heights](Tape& tp, int self) {
    Eigen::Index r0 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(Var(&tp, ids[k]))) tp.grad_ref(ids[k]) += tp.grad(self).middleRows(r0, heights[k]);
      r0 += heights[k];
    }
  });
}

Var slice_cols(Var a, int start, int count) {
  Tape& t = *a.tape();
  if (start < 0 || count < 0 || start + count > a.cols()) throw StructuralError("slice_cols: out of range");
  const int ia = a.id();
  return t.push(a.value().middleCols(start, count), t.needs_grad(a), [ia, start, count](Tape& tp, int self) {
    tp.grad_ref(ia).middleCols(start, count) += tp.grad(self);
  });
}

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double mx = scores.row(r).maxCoeff();
    out.row(r) = (scores.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace {

// Attention weights for one (group, head): softmax over visible keys, masked keys get 0.
Matrix masked_softmax(const Matrix& scores, std::span<const std::uint8_t> mask, int key_offset) {
  Matrix w = Matrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < scores.cols(); ++c)
      if (mask.empty() || mask[static_cast<std::size_t>(key_offset + c)]) mx = std::max(mx, scores(r, c));
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      if (mask.empty() || mask[static_cast<std::size_t>(key_offset + c)]) {
        w(r, c) = std::exp(scores(r, c) - mx);
        z += w(r, c);
      }
    }
    w.row(r) /= z;
  }
  return w;
}

}  // namespace

Var segmented_attention(Var q, Var k, Var v, const Segments& qs, const Segments& ks, int heads,
                        std::span<const std::uint8_t> key_mask) {
  Tape& t = tape_of(q, k);
  if (v.tape() != &t) throw StructuralError("attention: operands on different tapes");
  if (heads < 1) throw StructuralError("attention: head count must be positive");
  if (q.cols() != k.cols()) throw StructuralError("attention: query and key widths differ");
  if (k.rows() != v.rows()) throw StructuralError("attention: key and value counts differ");
  if (q.cols() % heads != 0 || v.cols() % heads != 0)
    throw StructuralError("attention: head count must divide the query/value widths");
  if (qs.total() != q.rows() || ks.total() != k.rows() || qs.count() != ks.count())
    throw StructuralError("attention: segments do not match the query/key rows");
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != k.rows())
    throw StructuralError("attention: key mask length differs from key count");

  const int dk = static_cast<int>(q.cols()) / heads;
  const int dv = static_cast<int>(v.cols()) / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dk));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();

  Matrix out = Matrix::Zero(q.rows(), v.cols());
  // weights[g * heads + h]
  std::vector<Matrix> weights(static_cast<std::size_t>(qs.count() * heads));
  for (int g = 0; g < qs.count(); ++g) {
    const int q0 = qs.begin(g), nq = qs.size(g);
    const int k0 = ks.begin(g), nk = ks.size(g);
    if (nq == 0 || nk == 0) continue;
    for (int h = 0; h < heads; ++h) {
      const Matrix scores = (Q.block(q0, h * dk, nq, dk) * K.block(k0, h * dk, nk, dk).transpose()) * sc;
      Matrix w = masked_softmax(scores, key_mask, k0);
      out.block(q0, h * dv, nq, dv).noalias() = w * V.block(k0, h * dv, nk, dv);
      weights[static_cast<std::size_t>(g * heads + h)] = std::move(w);
    }
  }

  const int iq = q.id(), ik = k.id(), iv = v.id();
  const bool gq = t.needs_grad(q), gk = t.needs_grad(k), gv = t.needs_grad(v);
  return t.push(std::move(out), gq || gk || gv,
                [=, weights = std::move(weights)](Tape& tp, int self) {
                  const Matrix& G = tp.grad(self);
                  const Matrix& Qv = tp.value(iq);
                  const Matrix& Kv = tp.value(ik);
                  const Matrix& Vv = tp.value(iv);
                  Matrix* dQ = gq ? &tp.grad_ref(iq) : nullptr;
                  Matrix* dK = gk ? &tp.grad_ref(ik) : nullptr;
                  Matrix* dV = gv ? &tp.grad_ref(iv) : nullptr;
                  for (int g = 0; g < qs.count(); ++g) {
                    const int q0 = qs.begin(g), nq = qs.size(g);
                    const int k0 = ks.begin(g), nk = ks.size(g);
                    if (nq == 0 || nk == 0) continue;
                    for (int h = 0; h < heads; ++h) {
                      const Matrix& w = weights[static_cast<std::size_t>(g * heads + h)];
                      const auto dO = G.block(q0, h * dv, nq, dv);
                      if (dV) dV->block(k0, h * dv, nk, dv).noalias() += w.transpose() * dO;
                      if (!dQ && !dK) continue;
                      const Matrix dW = dO * Vv.block(k0, h * dv, nk, dv).transpose();
                      Matrix dS = w.cwiseProduct(dW);
                      const Eigen::VectorXd rs = dS.rowwise().sum();
                      dS -= w.cwiseProduct(rs.replicate(1, nk));
                      dS *= sc;
                      if (dQ) dQ->block(q0, h * dk, nq, dk).noalias() += dS * Kv.block(k0, h * dk, nk, dk);
                      if (dK) dK->block(k0, h * dk, nk, dk).noalias() += dS.transpose() * Qv.block(q0, h * dk, nq, dk);
                    }
                  }
                });
}

Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask) {
  return segmented_attention(q, k, v, Segments::single(static_cast<int>(q.rows())),
                             Segments::single(static_cast<int>(k.rows())), 1, key_mask);
}

}  // namespace svo::nn
