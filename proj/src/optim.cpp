#include "seaget/optim.hpp"

#include <cmath>

#include "seaget/errors.hpp"

namespace seaget {

void adamw_step(std::span<Parameter* const> params, OptimizerState& state) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw NumericalError("adamw: non-finite gradient in " + p->name);
    if (p->grad.size() != p->value.size())
      throw ShapeError("adamw: gradient shape of " + p->name + " does not match its value");
  }
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.rows(), p->value.cols());
      state.v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.m.size() != params.size())
    throw ContractError("adamw: parameter count changed between steps");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double decay = 1.0 - state.learning_rate * state.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double step = state.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.epsilon);
      p.value[k] = p.value[k] * decay - step;
    }
  }
}

}  // namespace seaget
