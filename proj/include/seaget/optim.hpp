#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seaget/autodiff.hpp"

namespace seaget {

/// AdamW moments and hyperparameters. Moments are created lazily on the
/// first step, sized to the parameters passed in.
struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One decoupled-weight-decay Adam update using each Parameter::grad.
/// Throws NumericalError naming the parameter if a gradient is not finite;
/// in that case no parameter is modified.
void adamw_step(std::span<Parameter* const> params, OptimizerState& state);

}  // namespace seaget
