#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seaget/autodiff.hpp"
#include "seaget/dataio.hpp"
#include "seaget/embeddings.hpp"
#include "seaget/flowgraph.hpp"
#include "seaget/gnn.hpp"
#include "seaget/hours.hpp"

namespace seaget {

struct ModelConfig {
  std::size_t num_pois = 0;
  std::size_t num_categories = 0;
  std::size_t num_users = 0;
  std::size_t feature_width = 0;  // columns of the GCN input features
  EmbeddingWidths widths;
  std::size_t gcn_hidden_layers = 2;
  std::size_t encoder_layers = 2;
  std::size_t heads = 2;
  std::size_t ff_width = 0;  // 0 means 4 * d
  double dropout = 0.3;

  std::size_t d() const noexcept { return widths.checkin(); }
  std::size_t ffn() const noexcept { return ff_width != 0 ? ff_width : 4 * d(); }
};

struct EncoderLayer {
  std::vector<Parameter> query;  // per head, d x d/heads
  std::vector<Parameter> key;
  std::vector<Parameter> value;
  Parameter mix;                 // d x d
  Parameter norm1_gain, norm1_bias;
  Parameter ff_in, ff_in_bias;   // d x d_ff, 1 x d_ff
  Parameter ff_out, ff_out_bias; // d_ff x d, 1 x d
  Parameter norm2_gain, norm2_bias;

  static EncoderLayer init(std::size_t index, std::size_t d, std::size_t heads, std::size_t ffn,
                           Rng& rng);

  template <class F>
  void for_each_parameter(F&& f) {
    for (auto& p : query) f(p);
    for (auto& p : key) f(p);
    for (auto& p : value) f(p);
    f(mix);
    f(norm1_gain);
    f(norm1_bias);
    f(ff_in);
    f(ff_in_bias);
    f(ff_out);
    f(ff_out_bias);
    f(norm2_gain);
    f(norm2_bias);
  }
};

struct DecoderHeads {
  Parameter poi_weight, poi_bias;
  Parameter time_weight, time_bias;
  Parameter category_weight, category_bias;

  static DecoderHeads init(std::size_t d, std::size_t pois, std::size_t categories, Rng& rng);

  template <class F>
  void for_each_parameter(F&& f) {
    f(poi_weight);
    f(poi_bias);
    f(time_weight);
    f(time_bias);
    f(category_weight);
    f(category_bias);
  }
};

/// Every learnable tensor of the recommender. Plain value type: copying it
/// snapshots the weights.
struct ModelState {
  ModelConfig config;
  GcnStack gcn;
  TransitionAttentionParams attention;
  EmbeddingTables embeddings;
  std::vector<EncoderLayer> encoder;
  DecoderHeads heads;

  static ModelState init(const ModelConfig& config, std::uint64_t seed);

  template <class F>
  void for_each_parameter(F&& f) {
    gcn.for_each_parameter(f);
    attention.for_each_parameter(f);
    embeddings.for_each_parameter(f);
    for (auto& layer : encoder) layer.for_each_parameter(f);
    heads.for_each_parameter(f);
  }

  std::vector<Parameter*> parameters();
  void zero_grad();
  std::size_t parameter_count();
};

/// Fixed sinusoidal table: PE[p][2i] = sin(p / 10000^(2i/d)), PE[p][2i+1] = cos(...).
Tensor positional_encoding(std::size_t k, std::size_t d);
Var positional_encode(Var x);

/// Row-major k x k attention mask: query i may read key j iff j <= i
/// (when causal) and j < valid_len.
Mask attention_mask(std::size_t k, std::size_t valid_len, bool causal = true);

Var encoder_forward(Tape& tape, Var x, std::span<EncoderLayer> layers,
                    std::span<const std::uint8_t> allowed, double dropout, bool training, Rng& rng);

struct PredictionTriple {
  Var poi;       // k x N
  Var time;      // k x 1
  Var category;  // k x |cat|
};

PredictionTriple decode(Tape& tape, Var encoded, DecoderHeads& heads);

/// logits[i] += Phi[current_poi[i]], using the selected attention rows.
Var apply_transition_residual(Var poi_logits, const TransitionScores& scores,
                              const CsrMatrix& laplacian, std::span<const std::size_t> current_poi);
Tensor apply_transition_residual(const Tensor& poi_logits, const Tensor& phi,
                                 std::span<const std::size_t> current_poi);

struct FilterResult {
  std::vector<double> logits;
  std::size_t closed = 0;
  bool fallback = false;  // every POI was closed; logits returned unfiltered
};

/// Sets the logit of every POI closed at `query_local_time` to -inf.
FilterResult operational_filter(std::span<const double> logits, const OperationalHoursTable& table,
                                std::span<const std::size_t> poi_categories,
                                std::int64_t query_local_time);

/// Padded batch of trajectories. Position i of a trajectory is supervised
/// with check-in i+1; padding and final positions are masked out.
struct SequenceBatch {
  std::size_t max_len = 0;
  std::vector<CheckinContext> sequences;
  std::vector<std::size_t> current_poi;      // B*max_len, 0 at padding
  std::vector<std::size_t> target_poi;       // B*max_len
  std::vector<std::size_t> target_category;  // B*max_len
  Tensor target_time;                        // (B*max_len) x 1
  Mask target_mask;                          // B*max_len

  std::size_t batch_size() const noexcept { return sequences.size(); }
  std::size_t valid_targets() const noexcept;
};

CheckinContext context_of(const Trajectory& t, Hemisphere hemisphere = Hemisphere::northern);

/// `pad_to` of 0 pads to the longest trajectory in the batch.
SequenceBatch make_batch(std::span<const Trajectory* const> trajectories, std::size_t pad_to = 0,
                         Hemisphere hemisphere = Hemisphere::northern);

struct ForwardPass {
  Var poi_embeddings;
  TransitionScores scores;
  Var encoded;             // (B*max_len) x d
  PredictionTriple raw;    // decoder outputs before the residual
  Var poi_logits;          // raw.poi plus the transition residual
};

ForwardPass forward(Tape& tape, ModelState& model, const GraphMatrices& graph,
                    const SequenceBatch& batch, bool training, Rng& dropout_rng);

inline constexpr double kTimeLossWeight = 10.0;

/// L_final = L_poi + 10 * L_time + L_cat.
inline double combine_losses(double poi, double time, double category) noexcept {
  return poi + kTimeLossWeight * time + category;
}

struct LossParts {
  Var total;
  double poi = 0.0;
  double time = 0.0;
  double category = 0.0;
};

/// Cross-entropy on residual-adjusted POI logits and on category logits, MSE
/// on the next time of day, averaged over the target mask.
LossParts joint_loss(Var poi_logits, const PredictionTriple& raw, const SequenceBatch& batch);

}  // namespace seaget
