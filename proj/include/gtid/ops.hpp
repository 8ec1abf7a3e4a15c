#pragma once

#include <initializer_list>
#include <span>

#include "gtid/tensor.hpp"

namespace gtid {

enum class ElementwiseOp { add, sub, mul };
enum class Activation { sigmoid, tanh, relu };
enum class Reduction { mean, sum };

/// Clamping applied by log_op before taking the logarithm.
struct LogClamp {
  bool enabled = true;
  double epsilon = 1e-7;
};

Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise binary op. `b` may also be a 1 x cols row vector, which is
/// broadcast over the rows of `a`.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::mul, a, b); }

Tensor activation(Activation kind, const Tensor& x);
inline Tensor sigmoid(const Tensor& x) { return activation(Activation::sigmoid, x); }
inline Tensor tanh(const Tensor& x) { return activation(Activation::tanh, x); }
inline Tensor relu(const Tensor& x) { return activation(Activation::relu, x); }

/// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& x);

/// Scalar (shape [1]) mean or sum over every element.
Tensor reduce(Reduction kind, const Tensor& x);
inline Tensor mean(const Tensor& x) { return reduce(Reduction::mean, x); }
inline Tensor sum(const Tensor& x) { return reduce(Reduction::sum, x); }

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_cols(const Tensor& x, Index offset, Index width);

/// Natural log of clamp(x, eps, 1 - eps) when clamping is enabled. The
/// backward rule is 1 / x_clamped everywhere.
Tensor log_op(const Tensor& x, LogClamp clamp = {});

Tensor transpose(const Tensor& x);

/// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift = 0.0);

/// Normalizes every row to zero mean and unit (biased) variance, then applies
/// per-column gamma and beta (both 1 x cols).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double epsilon = 1e-5);

/// Scalar-times-vector token embedding for tabular rows.
///
/// `features` is B x n, `weights` is n x d. Row b*n + t of the (B*n) x d
/// result is features(b, t) * weights.row(t).
Tensor token_embed(const Tensor& features, const Tensor& weights);

/// Multi-head scaled dot-product attention over stacked sequences.
///
/// q, k, v are (S*L) x d_model: S sequences of `seq_len` rows each. Head j
/// uses the column block [j*d_k, (j+1)*d_k). Returns the concatenated head
/// outputs, (S*L) x d_model, before any output projection.
Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v, Index seq_len,
                         Index heads);

/// Mean over each block of `seq_len` consecutive rows: (S*L) x d -> S x d.
Tensor segment_mean_rows(const Tensor& x, Index seq_len);

} // namespace gtid
