#pragma once

#include <cmath>
#include <string>

#include "seaget/autodiff.hpp"

namespace seaget {

/// Weight matrix, uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Parameter uniform_weight(std::string name, std::size_t fan_in, std::size_t fan_out,
                                Rng& rng) {
  Tensor w(fan_in, fan_out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return Parameter(std::move(name), std::move(w));
}

inline Parameter zero_bias(std::string name, std::size_t width) {
  return Parameter(std::move(name), Tensor(1, width));
}

/// Embedding table, N(0, 0.02^2).
inline Parameter embedding_table(std::string name, std::size_t rows, std::size_t width, Rng& rng) {
  Tensor w(rows, width);
  for (double& v : w.values()) v = 0.02 * rng.normal();
  return Parameter(std::move(name), std::move(w));
}

}  // namespace seaget
