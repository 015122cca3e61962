#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seaget/autodiff.hpp"
#include "seaget/flowgraph.hpp"

namespace seaget {

/// Spectral GCN: `weights.size() - 1` hidden layers followed by the output
/// projection. Hidden layers use LeakyReLU; dropout precedes the projection.
struct GcnStack {
  std::vector<Parameter> weights;
  std::vector<Parameter> biases;
  double dropout = 0.3;
  double leaky_slope = 0.2;

  static GcnStack init(std::size_t in_width, std::size_t width, std::size_t hidden_layers,
                       double dropout, Rng& rng);

  std::size_t hidden_layers() const noexcept { return weights.empty() ? 0 : weights.size() - 1; }

  template <class F>
  void for_each_parameter(F&& f) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      f(weights[i]);
      f(biases[i]);
    }
  }
};

/// H0 = X, Hl = LeakyReLU(L Hl-1 Wl + bl), e_p = L dropout(H) Wout + bout.
/// Returns the N x width POI embedding matrix.
Var gcn_forward(Tape& tape, const GraphMatrices& graph, GcnStack& stack, bool training, Rng& rng);

struct TransitionAttentionParams {
  Parameter w1;  // h x h
  Parameter w2;  // h x h
  Parameter a1;  // h x 1
  Parameter a2;  // h x 1

  static TransitionAttentionParams init(std::size_t feature_width, Rng& rng);

  template <class F>
  void for_each_parameter(F&& f) {
    f(w1);
    f(w2);
    f(a1);
    f(a2);
  }
};

/// Per-node source and destination scores, each N x 1:
///   source = X W1 a1, destination = X W2 a2.
struct TransitionScores {
  Var source;
  Var destination;
};

TransitionScores transition_scores(Tape& tape, const Tensor& features,
                                   TransitionAttentionParams& params);

/// Selected rows of the transition attention map:
///   out[r][j] = (source[ids[r]] + destination[j]) * (L[ids[r]][j] + 1).
Var transition_rows(const TransitionScores& scores, const CsrMatrix& laplacian,
                    std::span<const std::size_t> ids);

/// The full N x N transition attention map.
Var transition_attention(Tape& tape, const Tensor& features, const CsrMatrix& laplacian,
                         TransitionAttentionParams& params);

/// Row `poi_id` of a materialized attention map.
std::vector<double> attention_row_for(const Tensor& phi, std::size_t poi_id);

}  // namespace seaget
