#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "matra/tensor.hpp"

namespace matra::nn {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

/// Tape of primitive applications in creation (and therefore topological)
/// order. With `record_grad` false the tape only holds values, which is what
/// inference and finite-difference evaluation use.
class Graph {
 public:
  explicit Graph(bool record_grad = true) : record_grad_(record_grad) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is accumulated by backward().
  Var parameter(Tensor value);
  /// Leaf viewing `value` without copying; `value` must outlive the graph.
  Var reference(const Tensor& value, bool requires_grad);

  const Tensor& value(Var v) const { return nodes_.at(v.id).get(); }
  /// Gradient of the last backward() target; zeros if the node did not
  /// contribute. Throws for nodes that do not track gradients.
  const Tensor& grad(Var v) const;

  bool record_grad() const noexcept { return record_grad_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a one-element tensor. Gradients of shared inputs
  /// accumulate across every use.
  void backward(Var loss);

  // Used by primitive implementations.
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& node_value(std::size_t id) const { return nodes_[id].get(); }
  const Tensor& node_grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of `id`, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

  /// Folds the outcome of a piecewise primitive's case split (which side of
  /// a ReLU each element fell on) into a running hash. Two evaluations of
  /// the same function with equal signatures lie on the same smooth piece.
  void record_branches(std::span<const double> inputs) noexcept;
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;

    const Tensor& get() const noexcept { return external ? *external : value; }
  };

  bool record_grad_;
  std::uint64_t branch_signature_ = 0xcbf29ce484222325ULL;
  std::vector<Node> nodes_;
};

// --- primitives ------------------------------------------------------------
// Matrices are rank 2. Vectors (rank 1) broadcast over rows where noted;
// there is no other broadcasting.

Var matmul(Var a, Var b);
/// a + b with equal shapes, or matrix + row-vector broadcast over rows.
Var add(Var a, Var b);
Var scale(Var a, double factor);
/// Row-wise softmax with max subtraction. Rows whose entries are all -inf
/// produce zeros.
Var softmax(Var a);
/// Row-wise normalization to zero mean and unit variance, then gain * x + bias.
Var layer_norm(Var x, Var gain, Var bias, double epsilon = 1e-5);
Var relu(Var a);
/// Rows of `table` selected by `ids`: [ids.size() x table.cols()].
Var embedding_lookup(Var table, std::span<const std::int32_t> ids);
/// axis 0 stacks rows, axis 1 joins columns.
Var concat(std::span<const Var> parts, int axis);
/// [begin, end) along `axis` of a matrix.
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var transpose(Var a);
/// Replaces entries where mask != 0 with `fill`; those entries receive no gradient.
Var masked_fill(Var a, std::span<const std::uint8_t> mask, double fill);
/// Sum of all elements as a one-element tensor.
Var sum(Var a);
/// Sum over rows of -log softmax(logits)[row, label], skipping rows whose
/// label equals `ignore_label`.
Var cross_entropy_sum(Var logits, std::span<const std::int32_t> labels, std::int32_t ignore_label);

// --- gradient checking -----------------------------------------------------

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  /// Coordinates whose step had to shrink to keep every stencil point on
  /// the same smooth piece as the base point.
  std::size_t reduced_steps = 0;
};

using ScalarFunction = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares reverse-mode gradients of `f` at `points` with central finite
/// differences (fourth-order stencil, step `epsilon`) on every coordinate.
/// When a stencil point crosses a ReLU kink (its branch signature differs
/// from the base point's), that coordinate's step is halved, up to ten times.
/// Relative error |a - n| / max(|a|, |n|) falls back to |a - n| when both
/// magnitudes are below 1e-8. Throws Error for non-finite values or an
/// epsilon outside (0, 1e-2].
GradCheckReport grad_check(const ScalarFunction& f, std::span<const Tensor> points, double epsilon);

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point, double epsilon);

}  // namespace matra::nn
