#include "gtid/optim.hpp"

#include <cmath>
#include <string>

#include "gtid/error.hpp"

namespace gtid {

void adam_step(std::span<Tensor> params, AdamState& state) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].is_leaf() || !params[i].has_grad()) {
      throw PreconditionError("adam_step: parameter " + std::to_string(i) +
                              " has no gradient buffer");
    }
  }
  if (state.first_moment.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].rows() != params[i].rows() ||
        state.first_moment[i].cols() != params[i].cols()) {
      throw DimensionError("adam_step: moment buffer shape mismatch for parameter " +
                           std::to_string(i) + " of shape " + params[i].shape_string());
    }
  }

  ++state.step;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = params[i].grad();
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseAbs2();
    auto m_hat = m.array() / correction1;
    auto v_hat = v.array() / correction2;
    params[i].mutable_value().array() -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
    params[i].zero_grad();
  }
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) {
    p.zero_grad();
  }
}

} // namespace gtid
