#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape owns every node created during a forward pass; nodes are
// recorded in creation order, so reverse iteration is a valid topological
// order for backpropagation.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vmr::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

/// A named trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool needs_grad = false;
  std::function<void(Node&)> backward;

  Matrix<T>& grad_buffer() {
    if (grad.size() == 0) grad.setZero(value.rows(), value.cols());
    return grad;
  }
};

template <typename T>
class Tape;

/// Non-owning handle to a tape node.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, Node<T>* node) : tape_(tape), node_(node) {}

  const Matrix<T>& value() const { return node_->value; }
  /// Gradient after Tape::backward; empty when nothing flowed into the node.
  const Matrix<T>& grad() const { return node_->grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  T item() const { return node_->value(0, 0); }
  bool needs_grad() const { return node_->needs_grad; }
  bool valid() const { return node_ != nullptr; }

  Tape<T>* tape() const { return tape_; }
  Node<T>* node() const { return node_; }

 private:
  Tape<T>* tape_ = nullptr;
  Node<T>* node_ = nullptr;
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> value);
  /// Leaf whose gradient is kept on the node.
  Var<T> variable(Matrix<T> value);
  /// Leaf bound to a parameter; backward accumulates into `p.grad`.
  Var<T> parameter(Parameter<T>& p);

  Var<T> record(Matrix<T> value, bool needs_grad, std::function<void(Node<T>&)> backward);

  /// Seeds d(root)/d(root) = 1 and propagates. `root` must be 1x1.
  void backward(const Var<T>& root);

  std::size_t size() const { return nodes_.size(); }

  /// When enabled, ops with a non-differentiable switch (rectifier, max,
  /// clamp) fold the branch they took into a signature. Two evaluations with
  /// equal signatures lie on the same smooth piece.
  void track_branches(bool on) { track_ = on; }
  bool tracks_branches() const { return track_; }
  void note_branch(std::uint64_t v) { signature_ = (signature_ ^ v) * 0x100000001b3ULL; }
  std::uint64_t branch_signature() const { return signature_; }

 private:
  std::vector<std::unique_ptr<Node<T>>> nodes_;
  bool track_ = false;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

// ---- elementwise and linear algebra ----

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a * b^T; the usual form for x W^T with W stored (out x in).
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
/// Adds a 1 x c row to every row of a.
template <typename T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
/// Multiplies every row of a elementwise by a 1 x c row.
template <typename T> Var<T> mul_row(const Var<T>& a, const Var<T>& row);
template <typename T> Var<T> scale(const Var<T>& a, T factor);

template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> softmax_rows(const Var<T>& a);

template <typename T> Var<T> concat_cols(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> slice_cols(const Var<T>& a, Index start, Index count);
template <typename T> Var<T> slice_rows(const Var<T>& a, Index start, Index count);
template <typename T> Var<T> gather_rows(const Var<T>& a, std::span<const Index> rows);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
/// Euclidean norm of every row (n x 1); the gradient at a zero row is zero.
template <typename T> Var<T> row_norms(const Var<T>& a);
/// sum_i weights[i] * terms[i] over 1x1 terms.
template <typename T> Var<T> weighted_sum(std::span<const Var<T>> terms, std::span<const T> weights);

// ---- fused losses and structured ops ----

/// Mean binary cross-entropy of scores (n x 1) against labels in [0, 1].
/// Scores are clamped to [eps, 1 - eps]; d/ds = (s - y) / (s (1 - s)) / n.
template <typename T>
Var<T> bce_mean(const Var<T>& scores, std::span<const double> labels, T eps = T(1e-7));

/// Distance correlation between paired rows of x and y (biased
/// double-centering estimator). Returns 0 when either distance variance is
/// below eps.
template <typename T>
Var<T> distance_correlation(const Var<T>& x, const Var<T>& y, T eps = T(1e-9));

/// Forward-only distance correlation on plain matrices.
template <typename T>
T distance_correlation_value(const Matrix<T>& x, const Matrix<T>& y, T eps = T(1e-9));

}  // namespace vmr::ag
