#include "gtid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gtid/error.hpp"

namespace gtid {

namespace {

using detail::Node;
using Backward = std::function<void(Node&)>;

// Builds the result node, wiring the backward rule only when some input
// needs a gradient.
Tensor make_result(const char* op, Matrix value, std::vector<Tensor> inputs, Backward rule,
                   int rank = 2) {
  if (finite_checks_enabled() && !value.allFinite()) {
    throw NumericDomainError(std::string(op) + ": non-finite output");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->rank = rank;
  node->op = op;
  const bool needs_grad =
      !NoGradGuard::active() &&
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) {
      node->inputs.push_back(t.node());
    }
    node->backward = std::move(rule);
  }
  return Tensor(std::move(node));
}

bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

std::string shapes(const Tensor& a, const Tensor& b) {
  return a.shape_string() + " and " + b.shape_string();
}

// Column sums accumulated serially in row order.
RowVector column_sums(const Matrix& m) {
  RowVector out = RowVector::Zero(m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    out += m.row(r);
  }
  return out;
}

constexpr double kSigmoidHi = 1.0 - 0x1.0p-53;

double stable_sigmoid(double x) {
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(s, std::numeric_limits<double>::min(), kSigmoidHi);
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ for shapes " + shapes(a, b));
  }
  Matrix out = a.value() * b.value();
  return make_result("matmul", std::move(out), {a, b}, [](Node& self) {
    const auto& A = self.inputs[0];
    const auto& B = self.inputs[1];
    if (wants(A)) {
      A->grad.noalias() += self.grad * B->value.transpose();
    }
    if (wants(B)) {
      B->grad.noalias() += A->value.transpose() * self.grad;
    }
  });
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  const bool same = a.rows() == b.rows() && a.cols() == b.cols();
  const bool broadcast = !same && b.rows() == 1 && b.cols() == a.cols();
  if (!same && !broadcast) {
    throw DimensionError("elementwise: incompatible shapes " + shapes(a, b));
  }
  Matrix out;
  if (same) {
    switch (op) {
    case ElementwiseOp::add: out = a.value() + b.value(); break;
    case ElementwiseOp::sub: out = a.value() - b.value(); break;
    case ElementwiseOp::mul: out = a.value().cwiseProduct(b.value()); break;
    }
  } else {
    const auto row = b.value().row(0);
    switch (op) {
    case ElementwiseOp::add: out = a.value().rowwise() + row; break;
    case ElementwiseOp::sub: out = a.value().rowwise() - row; break;
    case ElementwiseOp::mul: out = a.value().array().rowwise() * row.array(); break;
    }
  }
  const char* name = op == ElementwiseOp::add ? "add" : op == ElementwiseOp::sub ? "sub" : "mul";
  return make_result(
      name, std::move(out), {a, b},
      [op, broadcast](Node& self) {
        const auto& A = self.inputs[0];
        const auto& B = self.inputs[1];
        if (wants(A)) {
          if (op == ElementwiseOp::mul) {
            if (broadcast) {
              A->grad.array() += self.grad.array().rowwise() * B->value.row(0).array();
            } else {
              A->grad.array() += self.grad.array() * B->value.array();
            }
          } else {
            A->grad += self.grad;
          }
        }
        if (wants(B)) {
          Matrix upstream;
          switch (op) {
          case ElementwiseOp::add: upstream = self.grad; break;
          case ElementwiseOp::sub: upstream = -self.grad; break;
          case ElementwiseOp::mul: upstream = self.grad.cwiseProduct(A->value); break;
          }
          if (broadcast) {
            B->grad += column_sums(upstream);
          } else {
            B->grad += upstream;
          }
        }
      },
      a.rank());
}

Tensor activation(Activation kind, const Tensor& x) {
  Matrix out(x.rows(), x.cols());
  const char* name = "relu";
  switch (kind) {
  case Activation::sigmoid:
    out = x.value().unaryExpr(&stable_sigmoid);
    name = "sigmoid";
    break;
  case Activation::tanh:
    out = x.value().array().tanh().matrix();
    name = "tanh";
    break;
  case Activation::relu:
    out = x.value().cwiseMax(0.0);
    break;
  }
  return make_result(
      name, std::move(out), {x},
      [kind](Node& self) {
        const auto& X = self.inputs[0];
        const auto y = self.value.array();
        switch (kind) {
        case Activation::sigmoid:
          X->grad.array() += self.grad.array() * y * (1.0 - y);
          break;
        case Activation::tanh:
          X->grad.array() += self.grad.array() * (1.0 - y.square());
          break;
        case Activation::relu:
          X->grad.array() += (X->value.array() > 0.0).select(self.grad.array(), 0.0);
          break;
        }
      },
      x.rank());
}

Tensor softmax_rows(const Tensor& x) {
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double peak = x.value().row(r).maxCoeff();
    double total = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp(x.value()(r, c) - peak);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return make_result("softmax_rows", std::move(out), {x}, [](Node& self) {
    const auto& X = self.inputs[0];
    for (Index r = 0; r < self.value.rows(); ++r) {
      const double inner = self.grad.row(r).dot(self.value.row(r));
      X->grad.row(r).array() +=
          self.value.row(r).array() * (self.grad.row(r).array() - inner);
    }
  });
}

Tensor reduce(Reduction kind, const Tensor& x) {
  if (x.size() == 0) {
    throw PreconditionError("reduce: empty tensor");
  }
  double total = 0.0;
  const double* data = x.value().data();
  for (Index i = 0; i < x.size(); ++i) {
    total += data[i];
  }
  const double count = static_cast<double>(x.size());
  const double result = kind == Reduction::mean ? total / count : total;
  const double factor = kind == Reduction::mean ? 1.0 / count : 1.0;
  return make_result(
      kind == Reduction::mean ? "mean" : "sum", Matrix::Constant(1, 1, result), {x},
      [factor](Node& self) {
        self.inputs[0]->grad.array() += self.grad(0, 0) * factor;
      },
      1);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw PreconditionError("concat_cols: no parts");
  }
  const Index rows = parts.front().rows();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row-count mismatch between " + shapes(parts.front(), p));
    }
    total += p.cols();
  }
  Matrix out(rows, total);
  std::vector<Index> offsets;
  offsets.reserve(parts.size());
  Index offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result("concat_cols", std::move(out), std::move(inputs),
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                         auto& in = self.inputs[i];
                         if (wants(in)) {
                           in->grad += self.grad.middleCols(offsets[i], in->value.cols());
                         }
                       }
                     });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_cols(const Tensor& x, Index offset, Index width) {
  if (offset < 0 || width < 0 || offset + width > x.cols()) {
    throw IndexError("slice_cols: columns [" + std::to_string(offset) + ", " +
                     std::to_string(offset + width) + ") out of range for shape " +
                     x.shape_string());
  }
  Matrix out = x.value().middleCols(offset, width);
  return make_result("slice_cols", std::move(out), {x}, [offset, width](Node& self) {
    self.inputs[0]->grad.middleCols(offset, width) += self.grad;
  });
}

Tensor log_op(const Tensor& x, LogClamp clamp) {
  Matrix clamped;
  if (clamp.enabled) {
    clamped = x.value().cwiseMax(clamp.epsilon).cwiseMin(1.0 - clamp.epsilon);
  } else {
    if ((x.value().array() <= 0.0).any()) {
      throw NumericDomainError("log_op: non-positive input with clamping disabled");
    }
    clamped = x.value();
  }
  Matrix out = clamped.array().log().matrix();
  return make_result(
      "log", std::move(out), {x},
      [clamped = std::move(clamped)](Node& self) {
        self.inputs[0]->grad.array() += self.grad.array() / clamped.array();
      },
      x.rank());
}

Tensor transpose(const Tensor& x) {
  Matrix out = x.value().transpose();
  return make_result("transpose", std::move(out), {x}, [](Node& self) {
    self.inputs[0]->grad += self.grad.transpose();
  });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  Matrix out = (x.value().array() * scale + shift).matrix();
  return make_result(
      "affine", std::move(out), {x},
      [scale](Node& self) { self.inputs[0]->grad += scale * self.grad; }, x.rank());
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double epsilon) {
  const Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw DimensionError("layer_norm_rows: scale/shift must be 1x" + std::to_string(n) +
                         ", got " + shapes(gamma, beta));
  }
  Matrix normalized(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r);
    double mu = 0.0;
    for (Index c = 0; c < n; ++c) {
      mu += row(c);
    }
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (Index c = 0; c < n; ++c) {
      var += (row(c) - mu) * (row(c) - mu);
    }
    var /= static_cast<double>(n);
    inv_std(r) = 1.0 / std::sqrt(var + epsilon);
    normalized.row(r) = (row.array() - mu) * inv_std(r);
  }
  Matrix out = (normalized.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return make_result("layer_norm_rows", std::move(out), {x, gamma, beta},
                     [normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
                       const auto& X = self.inputs[0];
                       const auto& G = self.inputs[1];
                       const auto& B = self.inputs[2];
                       if (wants(G)) {
                         G->grad += column_sums(self.grad.cwiseProduct(normalized));
                       }
                       if (wants(B)) {
                         B->grad += column_sums(self.grad);
                       }
                       if (wants(X)) {
                         const double inv_n = 1.0 / static_cast<double>(normalized.cols());
                         for (Index r = 0; r < normalized.rows(); ++r) {
                           const RowVector dhat =
                               self.grad.row(r).cwiseProduct(G->value.row(0));
                           const double mean_d = dhat.sum() * inv_n;
                           const double mean_dx = dhat.dot(normalized.row(r)) * inv_n;
                           X->grad.row(r).array() +=
                               inv_std(r) * (dhat.array() - mean_d -
                                             normalized.row(r).array() * mean_dx);
                         }
                       }
                     });
}

Tensor token_embed(const Tensor& features, const Tensor& weights) {
  const Index batch = features.rows();
  const Index n = features.cols();
  if (weights.rows() != n) {
    throw DimensionError("token_embed: " + std::to_string(n) + " features but weights of shape " +
                         weights.shape_string());
  }
  const Index d = weights.cols();
  Matrix out(batch * n, d);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < n; ++t) {
      out.row(b * n + t) = features.value()(b, t) * weights.value().row(t);
    }
  }
  return make_result("token_embed", std::move(out), {features, weights}, [batch, n](Node& self) {
    const auto& X = self.inputs[0];
    const auto& W = self.inputs[1];
    for (Index b = 0; b < batch; ++b) {
      for (Index t = 0; t < n; ++t) {
        const auto upstream = self.grad.row(b * n + t);
        if (wants(W)) {
          W->grad.row(t) += X->value(b, t) * upstream;
        }
        if (wants(X)) {
          X->grad(b, t) += upstream.dot(W->value.row(t));
        }
      }
    }
  });
}

Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v, Index seq_len,
                         Index heads) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols()) {
    throw DimensionError("segment_attention: q/k/v shapes differ: " + q.shape_string() + ", " +
                         k.shape_string() + ", " + v.shape_string());
  }
  if (seq_len <= 0 || q.rows() % seq_len != 0) {
    throw DimensionError("segment_attention: " + std::to_string(q.rows()) +
                         " rows do not split into sequences of length " + std::to_string(seq_len));
  }
  if (heads <= 0 || q.cols() % heads != 0) {
    throw DimensionError("segment_attention: width " + std::to_string(q.cols()) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
  const Index n_seq = q.rows() / seq_len;
  const Index d_k = q.cols() / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_k));

  // Attention weights per (sequence, head), kept for the backward pass.
  std::vector<Matrix> weights(static_cast<std::size_t>(n_seq * heads));
  Matrix out(q.rows(), q.cols());
  for (Index s = 0; s < n_seq; ++s) {
    for (Index j = 0; j < heads; ++j) {
      const auto qj = q.value().block(s * seq_len, j * d_k, seq_len, d_k);
      const auto kj = k.value().block(s * seq_len, j * d_k, seq_len, d_k);
      const auto vj = v.value().block(s * seq_len, j * d_k, seq_len, d_k);
      Matrix a = (qj * kj.transpose()) * inv_scale;
      for (Index r = 0; r < seq_len; ++r) {
        const double peak = a.row(r).maxCoeff();
        a.row(r) = (a.row(r).array() - peak).exp();
        double total = 0.0;
        for (Index c = 0; c < seq_len; ++c) {
          total += a(r, c);
        }
        a.row(r) /= total;
      }
      out.block(s * seq_len, j * d_k, seq_len, d_k).noalias() = a * vj;
      weights[static_cast<std::size_t>(s * heads + j)] = std::move(a);
    }
  }
  return make_result(
      "segment_attention", std::move(out), {q, k, v},
      [weights = std::move(weights), n_seq, heads, seq_len, d_k, inv_scale](Node& self) {
        const auto& Q = self.inputs[0];
        const auto& K = self.inputs[1];
        const auto& V = self.inputs[2];
        for (Index s = 0; s < n_seq; ++s) {
          for (Index j = 0; j < heads; ++j) {
            const Matrix& a = weights[static_cast<std::size_t>(s * heads + j)];
            const Index r0 = s * seq_len;
            const Index c0 = j * d_k;
            const auto d_out = self.grad.block(r0, c0, seq_len, d_k);
            if (wants(V)) {
              V->grad.block(r0, c0, seq_len, d_k).noalias() += a.transpose() * d_out;
            }
            if (!wants(Q) && !wants(K)) {
              continue;
            }
            const Matrix d_a = d_out * V->value.block(r0, c0, seq_len, d_k).transpose();
            Matrix d_scores(seq_len, seq_len);
            for (Index r = 0; r < seq_len; ++r) {
              const double inner = d_a.row(r).dot(a.row(r));
              d_scores.row(r) = a.row(r).array() * (d_a.row(r).array() - inner);
            }
            d_scores *= inv_scale;
            if (wants(Q)) {
              Q->grad.block(r0, c0, seq_len, d_k).noalias() +=
                  d_scores * K->value.block(r0, c0, seq_len, d_k);
            }
            if (wants(K)) {
              K->grad.block(r0, c0, seq_len, d_k).noalias() +=
                  d_scores.transpose() * Q->value.block(r0, c0, seq_len, d_k);
            }
          }
        }
      });
}

Tensor segment_mean_rows(const Tensor& x, Index seq_len) {
  if (seq_len <= 0 || x.rows() % seq_len != 0) {
    throw DimensionError("segment_mean_rows: " + std::to_string(x.rows()) +
                         " rows do not split into blocks of " + std::to_string(seq_len));
  }
  const Index n_seq = x.rows() / seq_len;
  const double inv = 1.0 / static_cast<double>(seq_len);
  Matrix out = Matrix::Zero(n_seq, x.cols());
  for (Index s = 0; s < n_seq; ++s) {
    for (Index r = 0; r < seq_len; ++r) {
      out.row(s) += x.value().row(s * seq_len + r);
    }
    out.row(s) *= inv;
  }
  return make_result("segment_mean_rows", std::move(out), {x}, [seq_len, n_seq, inv](Node& self) {
    auto& X = self.inputs[0];
    for (Index s = 0; s < n_seq; ++s) {
      for (Index r = 0; r < seq_len; ++r) {
        X->grad.row(s * seq_len + r) += inv * self.grad.row(s);
      }
    }
  });
}

} // namespace gtid
