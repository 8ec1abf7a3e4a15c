#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gtid {

/// Row-major dense matrix; the storage type behind every Tensor.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Eigen::Index;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  int rank = 2;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the grads of inputs that
  // require one. Empty for leaves.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
};

} // namespace detail

/// Dense rank-1 or rank-2 array of doubles with an optional gradient.
///
/// Tensor is a shared handle: copies alias the same storage. Rank-1 tensors of
/// length n are stored as 1 x n rows. Operations on tensors that require a
/// gradient link their result into a define-by-run graph that `backward`
/// traverses.
class Tensor {
public:
  Tensor();

  static Tensor from(Matrix value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor vector(const Eigen::Ref<const RowVector>& values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  int rank() const { return node_->rank; }
  std::vector<Index> shape() const;
  std::string shape_string() const;
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  /// Mutable access for optimizers and initialization; leaves only.
  Matrix& mutable_value();
  double item() const;
  double operator()(Index r, Index c) const { return node_->value(r, c); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_->requires_grad && node_->grad.size() == node_->value.size(); }
  const Matrix& grad() const { return node_->grad; }
  void zero_grad();

  bool is_leaf() const { return node_->is_leaf(); }
  /// New leaf holding a copy of the value, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered list of the operations that produced a tensor.
///
/// Only operations that (transitively) depend on a gradient-requiring leaf
/// are recorded. Every operation's inputs precede it.
class ComputationRecord {
public:
  static ComputationRecord trace(const Tensor& output);

  std::size_t size() const { return ops_.size(); }
  std::span<const std::shared_ptr<detail::Node>> operations() const { return ops_; }
  std::span<const std::shared_ptr<detail::Node>> leaves() const { return leaves_; }
  const std::shared_ptr<detail::Node>& output() const { return output_; }

private:
  std::vector<std::shared_ptr<detail::Node>> ops_;
  std::vector<std::shared_ptr<detail::Node>> leaves_;
  std::shared_ptr<detail::Node> output_;
};

/// Reverse-mode pass from a scalar loss. Leaf gradients accumulate across
/// calls until zeroed.
void backward(const Tensor& loss, const ComputationRecord& record);
void backward(const Tensor& loss);

/// While alive, operations on this thread do not record gradient history.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

private:
  bool previous_;
};

/// Post-op finiteness checks. Enabled unless GTID_CHECK_FINITE=0 is set in
/// the environment at startup; can be toggled programmatically.
bool finite_checks_enabled();
void set_finite_checks(bool enabled);

} // namespace gtid
