#include "seaget/gnn.hpp"

#include <numeric>

#include "seaget/errors.hpp"
#include "seaget/init.hpp"

namespace seaget {

GcnStack GcnStack::init(std::size_t in_width, std::size_t width, std::size_t hidden_layers,
                        double dropout, Rng& rng) {
  if (hidden_layers < 1) throw ContractError("gcn: need at least one hidden layer");
  GcnStack s;
  s.dropout = dropout;
  for (std::size_t l = 0; l <= hidden_layers; ++l) {
    const std::size_t fan_in = l == 0 ? in_width : width;
    s.weights.push_back(uniform_weight("gcn.w" + std::to_string(l), fan_in, width, rng));
    s.biases.push_back(zero_bias("gcn.b" + std::to_string(l), width));
  }
  return s;
}

Var gcn_forward(Tape& tape, const GraphMatrices& graph, GcnStack& stack, bool training, Rng& rng) {
  if (stack.weights.size() < 2 || stack.biases.size() != stack.weights.size())
    throw ContractError("gcn: stack needs hidden layers plus an output projection");
  if (stack.weights[0].value.rows() != graph.feature_width())
    throw ContractError("gcn: first weight expects " + std::to_string(stack.weights[0].value.rows()) +
                        " input features, graph has " + std::to_string(graph.feature_width()));
  if (graph.laplacian.rows != graph.node_count())
    throw ContractError("gcn: laplacian and feature row counts differ");

  // Layer 1 uses the precomputed sparse L*X.
  Var h = ad::spmm(graph.laplacian_features, tape.param(stack.weights[0]));
  h = ad::leaky_relu(ad::add_bias(h, tape.param(stack.biases[0])), stack.leaky_slope);
  for (std::size_t l = 1; l < stack.hidden_layers(); ++l) {
    Var z = ad::spmm(graph.laplacian, ad::matmul(h, tape.param(stack.weights[l])));
    h = ad::leaky_relu(ad::add_bias(z, tape.param(stack.biases[l])), stack.leaky_slope);
  }
  h = ad::dropout(h, stack.dropout, training, rng);
  const std::size_t out = stack.hidden_layers();
  Var e = ad::spmm(graph.laplacian, ad::matmul(h, tape.param(stack.weights[out])));
  return ad::add_bias(e, tape.param(stack.biases[out]));
}

TransitionAttentionParams TransitionAttentionParams::init(std::size_t feature_width, Rng& rng) {
  return {uniform_weight("attn.w1", feature_width, feature_width, rng),
          uniform_weight("attn.w2", feature_width, feature_width, rng),
          uniform_weight("attn.a1", feature_width, 1, rng),
          uniform_weight("attn.a2", feature_width, 1, rng)};
}

TransitionScores transition_scores(Tape& tape, const Tensor& features,
                                   TransitionAttentionParams& params) {
  if (params.w1.value.rows() != features.cols())
    throw ContractError("transition attention: feature width mismatch");
  // X (W a) == (X W) a; the right-hand grouping avoids an N x h intermediate.
  Var w1a1 = ad::matmul(tape.param(params.w1), tape.param(params.a1));
  Var w2a2 = ad::matmul(tape.param(params.w2), tape.param(params.a2));
  return {ad::matmul(features, w1a1), ad::matmul(features, w2a2)};
}

Var transition_rows(const TransitionScores& scores, const CsrMatrix& laplacian,
                    std::span<const std::size_t> ids) {
  Tape& tape = scores.source.tape();
  const std::size_t n = scores.source.rows();
  if (laplacian.rows != n) throw ContractError("transition attention: laplacian size mismatch");
  for (std::size_t id : ids)
    if (id >= n) throw ContractError("transition attention: poi id " + std::to_string(id) + " out of range");
  Tensor shifted = laplacian.dense_rows(ids);
  for (double& v : shifted.values()) v += 1.0;
  Var pair = ad::outer_sum(ad::gather_rows(scores.source, ids), ad::transpose(scores.destination));
  return ad::hadamard(pair, tape.constant(std::move(shifted)));
}

Var transition_attention(Tape& tape, const Tensor& features, const CsrMatrix& laplacian,
                         TransitionAttentionParams& params) {
  const TransitionScores scores = transition_scores(tape, features, params);
  std::vector<std::size_t> all(features.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return transition_rows(scores, laplacian, all);
}

std::vector<double> attention_row_for(const Tensor& phi, std::size_t poi_id) {
  if (poi_id >= phi.rows())
    throw ContractError("attention_row_for: poi id " + std::to_string(poi_id) + " out of range");
  const auto r = phi.row(poi_id);
  return {r.begin(), r.end()};
}

}  // namespace seaget
