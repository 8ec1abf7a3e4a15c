#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gtid/tensor.hpp"

namespace gtid {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers and step counter for one parameter list. Buffers are sized
/// on the first step and must keep matching the parameters afterwards.
struct AdamState {
  AdamHyper hyper;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamHyper h) : hyper(h) {}
};

/// One bias-corrected Adam update, then zeroes the gradients.
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grad(std::span<Tensor> params);

} // namespace gtid
