// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

namespace svo::nn {

/// Dense 2-D tensor storage. Every tensor in this library is rank 2 (rows x cols).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  Matrix value;
  Matrix grad;  // same shape as value
};

/// Contiguous row groups: group g spans rows [offsets[g], offsets[g + 1]).
struct Segments {
  std::vector<int> offsets{0};

  int count() const { return static_cast<int>(offsets.size()) - 1; }
  int total() const { return offsets.back(); }
  int begin(int g) const { return offsets[static_cast<std::size_t>(g)]; }
  int size(int g) const { return offsets[static_cast<std::size_t>(g) + 1] - offsets[static_cast<std::size_t>(g)]; }
  void push(int n) { offsets.push_back(offsets.back() + n); }
  static Segments single(int n) {
    Segments s;
    s.push(n);
    return s;
  }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records forward operations so that backward() can push gradients to leaves.
/// Nodes are created in topological order; backward walks them in reverse.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient.
  Var constant(Matrix value);
  /// Leaf that receives a gradient (inspect with Var::grad()).
  Var variable(Matrix value);
  /// Leaf bound to a parameter; backward() accumulates into Parameter::grad.
  /// Binding the same parameter twice returns the same node.
  Var param(Parameter& p);

  /// Reverse sweep from a 1x1 root. Throws StructuralError for non-scalar roots.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Op construction interface.
  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, int self)> backward_fn);
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].needs_grad; }
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  /// Gradient accumulator for node `id`, zero-initialised on first access.
  Matrix& grad_ref(int id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, int)> backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

// Elementwise / linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(Var a, Var row);
Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);  // zero gradient where clamped
/// Sum of every entry (1x1).
Var sum(Var a);
Var mean(Var a);
/// Row sums (n x 1).
Var sum_cols(Var a);
/// Gradient-blocking copy.
Var detach(Var a);

// Structural.
/// Sums rows within each segment; output has segments.count() rows.
Var segment_sum(Var a, const Segments& segments);
Var gather_rows(Var a, std::span<const int> rows);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, int start, int count);

/// Scaled dot-product attention restricted to matching segments: query rows in segment g attend
/// only to key rows in segment g. Columns are split into `heads` equal heads, each scaled by
/// 1/sqrt(head_dim). `key_mask`, when non-empty, excludes keys with value 0. Queries with no
/// visible key produce zero rows.
Var segmented_attention(Var q, Var k, Var v, const Segments& q_segments, const Segments& k_segments, int heads,
                        std::span<const std::uint8_t> key_mask = {});

/// softmax(Q K^T / sqrt(d_k)) V for a single group and head.
Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask = {});

/// Row-wise softmax of a plain matrix (used by attention and its tests).
Matrix softmax_rows(const Matrix& scores);

}  // namespace svo::nn
