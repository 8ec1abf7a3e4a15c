#include "gtid/tensor.hpp"

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "gtid/error.hpp"

namespace gtid {

namespace {

std::atomic<bool>& finite_flag() {
  static std::atomic<bool> flag = [] {
    const char* env = std::getenv("GTID_CHECK_FINITE");
    return !(env && std::string_view(env) == "0");
  }();
  return flag;
}

std::shared_ptr<detail::Node> make_leaf(Matrix value, bool requires_grad, int rank) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->rank = rank;
  node->requires_grad = requires_grad;
  if (requires_grad) {
    node->grad = Matrix::Zero(node->value.rows(), node->value.cols());
  }
  return node;
}

thread_local bool no_grad_active = false;

} // namespace

NoGradGuard::NoGradGuard() : previous_(no_grad_active) { no_grad_active = true; }

NoGradGuard::~NoGradGuard() { no_grad_active = previous_; }

bool NoGradGuard::active() { return no_grad_active; }

bool finite_checks_enabled() { return finite_flag().load(std::memory_order_relaxed); }

void set_finite_checks(bool enabled) { finite_flag().store(enabled, std::memory_order_relaxed); }

Tensor::Tensor() : node_(make_leaf(Matrix(0, 0), false, 2)) {}

Tensor Tensor::from(Matrix value, bool requires_grad) {
  if (finite_checks_enabled() && !value.allFinite()) {
    throw NumericDomainError("tensor: non-finite value in initializer");
  }
  return Tensor(make_leaf(std::move(value), requires_grad, 2));
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  Matrix m(1, static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) {
    m(0, i++) = v;
  }
  Tensor t = from(std::move(m), requires_grad);
  t.node_->rank = 1;
  return t;
}

Tensor Tensor::vector(const Eigen::Ref<const RowVector>& values, bool requires_grad) {
  Tensor t = from(Matrix(values), requires_grad);
  t.node_->rank = 1;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  const auto n_rows = static_cast<Index>(rows.size());
  const auto n_cols = n_rows == 0 ? Index{0} : static_cast<Index>(rows.begin()->size());
  Matrix m(n_rows, n_cols);
  Index r = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != n_cols) {
      throw DimensionError("tensor: ragged matrix initializer");
    }
    Index c = 0;
    for (double v : row) {
      m(r, c++) = v;
    }
    ++r;
  }
  return from(std::move(m), requires_grad);
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return from(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  Tensor t = from(Matrix::Constant(1, 1, value), requires_grad);
  t.node_->rank = 1;
  return t;
}

std::vector<Index> Tensor::shape() const {
  if (rank() == 1) {
    return {node_->value.size()};
  }
  return {rows(), cols()};
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  if (rank() == 1) {
    os << "[" << size() << "]";
  } else {
    os << "[" << rows() << "x" << cols() << "]";
  }
  return os.str();
}

Matrix& Tensor::mutable_value() {
  if (!is_leaf()) {
    throw PreconditionError("tensor: mutable_value on a non-leaf tensor");
  }
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    throw PreconditionError("tensor: item() on tensor of shape " + shape_string());
  }
  return node_->value(0, 0);
}

void Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) {
    throw PreconditionError("tensor: requires_grad can only be toggled on leaves");
  }
  node_->requires_grad = on;
  if (on && node_->grad.size() != node_->value.size()) {
    node_->grad = Matrix::Zero(rows(), cols());
  }
}

void Tensor::zero_grad() {
  if (node_->requires_grad) {
    node_->grad.setZero(rows(), cols());
  }
}

Tensor Tensor::detach() const {
  Tensor t(make_leaf(node_->value, false, node_->rank));
  return t;
}

ComputationRecord ComputationRecord::trace(const Tensor& output) {
  ComputationRecord record;
  record.output_ = output.node();
  if (!output.requires_grad()) {
    return record;
  }
  // Iterative post-order DFS; inputs are visited in argument order so the
  // resulting order is a deterministic function of the graph.
  struct Frame {
    std::shared_ptr<detail::Node> node;
    std::size_t next;
  };
  std::unordered_set<const detail::Node*> seen{output.node().get()};
  std::vector<Frame> stack{{output.node(), 0}};
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next < top.node->inputs.size()) {
      const auto& child = top.node->inputs[top.next++];
      if (child->requires_grad && seen.insert(child.get()).second) {
        stack.push_back({child, 0});
      }
    } else {
      auto done = std::move(top.node);
      stack.pop_back();
      (done->is_leaf() ? record.leaves_ : record.ops_).push_back(std::move(done));
    }
  }
  return record;
}

void backward(const Tensor& loss, const ComputationRecord& record) {
  if (loss.size() != 1) {
    throw PreconditionError("backward: loss must be a scalar, got shape " + loss.shape_string());
  }
  if (record.output() != loss.node()) {
    throw PreconditionError("backward: record was not traced from this loss");
  }
  if (!loss.requires_grad()) {
    return;
  }
  for (const auto& op : record.operations()) {
    op->grad.setZero(op->value.rows(), op->value.cols());
  }
  detail::Node& out = *loss.node();
  if (out.grad.size() != 1) {
    out.grad = Matrix::Zero(1, 1);
  }
  out.grad(0, 0) += 1.0;
  const auto ops = record.operations();
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    (*it)->backward(**it);
  }
  if (finite_checks_enabled()) {
    for (const auto& leaf : record.leaves()) {
      if (!leaf->grad.allFinite()) {
        throw NumericDomainError("backward: non-finite gradient reached a leaf");
      }
    }
  }
}

void backward(const Tensor& loss) { backward(loss, ComputationRecord::trace(loss)); }

} // namespace gtid
