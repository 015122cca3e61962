#include "seaget/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "seaget/errors.hpp"
#include "seaget/init.hpp"

namespace seaget {

EncoderLayer EncoderLayer::init(std::size_t index, std::size_t d, std::size_t heads,
                                std::size_t ffn, Rng& rng) {
  if (heads == 0 || d % heads != 0) {
    throw ContractError("encoder width " + std::to_string(d) + " is not divisible by " +
                        std::to_string(heads) + " heads");
  }
  const std::string prefix = "encoder" + std::to_string(index) + ".";
  const std::size_t head_width = d / heads;
  EncoderLayer layer;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string suffix = std::to_string(h);
    layer.query.push_back(uniform_weight(prefix + "wq" + suffix, d, head_width, rng));
    layer.key.push_back(uniform_weight(prefix + "wk" + suffix, d, head_width, rng));
    layer.value.push_back(uniform_weight(prefix + "wv" + suffix, d, head_width, rng));
  }
  layer.mix = uniform_weight(prefix + "wo", d, d, rng);
  Tensor ones(1, d);
  ones.fill(1.0);
  layer.norm1_gain = Parameter(prefix + "ln1.gain", ones);
  layer.norm1_bias = zero_bias(prefix + "ln1.bias", d);
  layer.ff_in = uniform_weight(prefix + "ff1.w", d, ffn, rng);
  layer.ff_in_bias = zero_bias(prefix + "ff1.b", ffn);
  layer.ff_out = uniform_weight(prefix + "ff2.w", ffn, d, rng);
  layer.ff_out_bias = zero_bias(prefix + "ff2.b", d);
  layer.norm2_gain = Parameter(prefix + "ln2.gain", ones);
  layer.norm2_bias = zero_bias(prefix + "ln2.bias", d);
  return layer;
}

DecoderHeads DecoderHeads::init(std::size_t d, std::size_t pois, std::size_t categories, Rng& rng) {
  DecoderHeads heads;
  heads.poi_weight = uniform_weight("head.poi.w", d, pois, rng);
  heads.poi_bias = zero_bias("head.poi.b", pois);
  heads.time_weight = uniform_weight("head.time.w", d, 1, rng);
  heads.time_bias = zero_bias("head.time.b", 1);
  heads.category_weight = uniform_weight("head.cat.w", d, categories, rng);
  heads.category_bias = zero_bias("head.cat.b", categories);
  return heads;
}

ModelState ModelState::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.num_pois == 0 || config.num_categories == 0 || config.num_users == 0 ||
      config.feature_width == 0) {
    throw ContractError("model config needs positive POI, category, user and feature counts");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ContractError("dropout must lie in [0, 1)");
  }
  Rng rng(seed, RngStream::init);
  ModelState m;
  m.config = config;
  m.gcn = GcnStack::init(config.feature_width, config.widths.poi, config.gcn_hidden_layers,
                         config.dropout, rng);
  m.attention = TransitionAttentionParams::init(config.feature_width, rng);
  m.embeddings = EmbeddingTables::init(config.num_users, config.num_categories, config.widths, rng);
  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    m.encoder.push_back(EncoderLayer::init(l, config.d(), config.heads, config.ffn(), rng));
  }
  m.heads = DecoderHeads::init(config.d(), config.num_pois, config.num_categories, rng);
  return m;
}

std::vector<Parameter*> ModelState::parameters() {
  std::vector<Parameter*> out;
  for_each_parameter([&](Parameter& p) { out.push_back(&p); });
  return out;
}

void ModelState::zero_grad() {
  for_each_parameter([](Parameter& p) { p.zero_grad(); });
}

std::size_t ModelState::parameter_count() {
  std::size_t n = 0;
  for_each_parameter([&](Parameter& p) { n += p.value.size(); });
  return n;
}

Tensor positional_encoding(std::size_t k, std::size_t d) {
  Tensor pe(k, d);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      const double pair = static_cast<double>(i - i % 2);
      const double angle = static_cast<double>(p) / std::pow(10000.0, pair / static_cast<double>(d));
      pe(p, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Var positional_encode(Var x) {
  Tape& tape = x.tape();
  return ad::add(x, tape.constant(positional_encoding(x.rows(), x.cols())));
}

Mask attention_mask(std::size_t k, std::size_t valid_len, bool causal) {
  Mask m(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      m[i * k + j] = (j < valid_len && (!causal || j <= i)) ? 1 : 0;
    }
  }
  return m;
}

namespace {

Var encoder_layer(Tape& tape, Var x, EncoderLayer& layer, std::span<const std::uint8_t> allowed,
                  double dropout, bool training, Rng& rng) {
  std::vector<Var> heads;
  heads.reserve(layer.query.size());
  for (std::size_t h = 0; h < layer.query.size(); ++h) {
    Var q = ad::matmul(x, tape.param(layer.query[h]));
    Var k = ad::matmul(x, tape.param(layer.key[h]));
    Var v = ad::matmul(x, tape.param(layer.value[h]));
    Var weights = ad::softmax_rows(ad::matmul(q, ad::transpose(k)), allowed);
    weights = ad::dropout(weights, dropout, training, rng);
    heads.push_back(ad::matmul(weights, v));
  }
  Var attended = ad::matmul(ad::concat_cols(heads), tape.param(layer.mix));
  Var h1 = ad::layer_norm(ad::add(x, attended), tape.param(layer.norm1_gain),
                          tape.param(layer.norm1_bias));
  Var ff = ad::relu(ad::add_bias(ad::matmul(h1, tape.param(layer.ff_in)), tape.param(layer.ff_in_bias)));
  ff = ad::add_bias(ad::matmul(ff, tape.param(layer.ff_out)), tape.param(layer.ff_out_bias));
  ff = ad::dropout(ff, dropout, training, rng);
  return ad::layer_norm(ad::add(h1, ff), tape.param(layer.norm2_gain), tape.param(layer.norm2_bias));
}

}  // namespace

Var encoder_forward(Tape& tape, Var x, std::span<EncoderLayer> layers,
                    std::span<const std::uint8_t> allowed, double dropout, bool training, Rng& rng) {
  if (allowed.size() != x.rows() * x.rows()) {
    throw ShapeError("attention mask has " + std::to_string(allowed.size()) + " entries for " +
                     std::to_string(x.rows()) + " positions");
  }
  for (auto& layer : layers) x = encoder_layer(tape, x, layer, allowed, dropout, training, rng);
  return x;
}

PredictionTriple decode(Tape& tape, Var encoded, DecoderHeads& heads) {
  PredictionTriple out;
  out.poi = ad::add_bias(ad::matmul(encoded, tape.param(heads.poi_weight)), tape.param(heads.poi_bias));
  out.time =
      ad::add_bias(ad::matmul(encoded, tape.param(heads.time_weight)), tape.param(heads.time_bias));
  out.category = ad::add_bias(ad::matmul(encoded, tape.param(heads.category_weight)),
                              tape.param(heads.category_bias));
  return out;
}

Var apply_transition_residual(Var poi_logits, const TransitionScores& scores,
                              const CsrMatrix& laplacian, std::span<const std::size_t> current_poi) {
  if (current_poi.size() != poi_logits.rows()) {
    throw ShapeError("transition residual: " + std::to_string(current_poi.size()) +
                     " current POIs for " + std::to_string(poi_logits.rows()) + " logit rows");
  }
  return ad::add(poi_logits, transition_rows(scores, laplacian, current_poi));
}

Tensor apply_transition_residual(const Tensor& poi_logits, const Tensor& phi,
                                 std::span<const std::size_t> current_poi) {
  if (current_poi.size() != poi_logits.rows() || phi.cols() != poi_logits.cols()) {
    throw ShapeError("transition residual: logits " + shape_string(poi_logits) + ", map " +
                     shape_string(phi) + ", " + std::to_string(current_poi.size()) + " ids");
  }
  Tensor out = poi_logits;
  for (std::size_t r = 0; r < current_poi.size(); ++r) {
    if (current_poi[r] >= phi.rows()) throw ContractError("transition residual: POI id out of range");
    for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) += phi(current_poi[r], j);
  }
  return out;
}

FilterResult operational_filter(std::span<const double> logits, const OperationalHoursTable& table,
                                std::span<const std::size_t> poi_categories,
                                std::int64_t query_local_time) {
  if (logits.size() != poi_categories.size()) {
    throw ShapeError("operational filter: " + std::to_string(logits.size()) + " logits for " +
                     std::to_string(poi_categories.size()) + " POIs");
  }
  FilterResult out;
  out.logits.assign(logits.begin(), logits.end());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!table.is_open(i, poi_categories[i], query_local_time)) {
      out.logits[i] = -std::numeric_limits<double>::infinity();
      ++out.closed;
    }
  }
  if (!logits.empty() && out.closed == logits.size()) {
    out.logits.assign(logits.begin(), logits.end());
    out.fallback = true;
  }
  return out;
}

std::size_t SequenceBatch::valid_targets() const noexcept {
  std::size_t n = 0;
  for (auto m : target_mask) n += m;
  return n;
}

CheckinContext context_of(const Trajectory& t, Hemisphere hemisphere) {
  CheckinContext ctx;
  ctx.user = t.user_id;
  for (const auto& c : t.checkins) {
    const auto local = c.local_timestamp();
    ctx.pois.push_back(c.poi_id);
    ctx.categories.push_back(c.category_id);
    ctx.seasons.push_back(static_cast<std::size_t>(assign_season(local, hemisphere)));
    ctx.t_norm.push_back(time_of_day_fraction(local));
  }
  return ctx;
}

SequenceBatch make_batch(std::span<const Trajectory* const> trajectories, std::size_t pad_to,
                         Hemisphere hemisphere) {
  if (trajectories.empty()) throw ContractError("empty batch");
  SequenceBatch batch;
  std::size_t longest = 0;
  for (const Trajectory* t : trajectories) {
    if (t->checkins.empty()) throw ContractError("trajectory " + std::to_string(t->id) + " is empty");
    longest = std::max(longest, t->size());
  }
  if (pad_to != 0 && pad_to < longest) {
    throw ContractError("pad length " + std::to_string(pad_to) + " is shorter than trajectory length " +
                        std::to_string(longest));
  }
  batch.max_len = pad_to != 0 ? pad_to : longest;
  const std::size_t total = trajectories.size() * batch.max_len;
  batch.current_poi.assign(total, 0);
  batch.target_poi.assign(total, 0);
  batch.target_category.assign(total, 0);
  batch.target_time = Tensor(total, 1);
  batch.target_mask.assign(total, 0);
  for (std::size_t b = 0; b < trajectories.size(); ++b) {
    batch.sequences.push_back(context_of(*trajectories[b], hemisphere));
    const CheckinContext& ctx = batch.sequences.back();
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      const std::size_t row = b * batch.max_len + i;
      batch.current_poi[row] = ctx.pois[i];
      if (i + 1 < ctx.size()) {
        batch.target_poi[row] = ctx.pois[i + 1];
        batch.target_category[row] = ctx.categories[i + 1];
        batch.target_time(row, 0) = ctx.t_norm[i + 1];
        batch.target_mask[row] = 1;
      }
    }
  }
  return batch;
}

ForwardPass forward(Tape& tape, ModelState& model, const GraphMatrices& graph,
                    const SequenceBatch& batch, bool training, Rng& dropout_rng) {
  ForwardPass out;
  out.poi_embeddings = gcn_forward(tape, graph, model.gcn, training, dropout_rng);
  out.scores = transition_scores(tape, graph.features, model.attention);

  const std::size_t d = model.config.d();
  const std::size_t len = batch.max_len;
  std::vector<Var> encoded;
  encoded.reserve(batch.batch_size());
  for (const auto& ctx : batch.sequences) {
    Var x = checkin_embedding(tape, model.embeddings, out.poi_embeddings, ctx).combined;
    if (ctx.size() < len) {
      const Var parts[] = {x, tape.constant(Tensor(len - ctx.size(), d))};
      x = ad::concat_rows(parts);
    }
    x = positional_encode(x);
    const Mask allowed = attention_mask(len, ctx.size());
    encoded.push_back(encoder_forward(tape, x, model.encoder, allowed, model.config.dropout,
                                      training, dropout_rng));
  }
  out.encoded = encoded.size() == 1 ? encoded.front() : ad::concat_rows(encoded);
  out.raw = decode(tape, out.encoded, model.heads);
  out.poi_logits = apply_transition_residual(out.raw.poi, out.scores, graph.laplacian, batch.current_poi);
  return out;
}

LossParts joint_loss(Var poi_logits, const PredictionTriple& raw, const SequenceBatch& batch) {
  Var poi = ad::cross_entropy(poi_logits, batch.target_poi, batch.target_mask);
  Var time = ad::mse(raw.time, batch.target_time, batch.target_mask);
  Var category = ad::cross_entropy(raw.category, batch.target_category, batch.target_mask);
  LossParts out;
  out.poi = poi.value()(0, 0);
  out.time = time.value()(0, 0);
  out.category = category.value()(0, 0);
  out.total = ad::add(ad::add(poi, ad::scale(time, kTimeLossWeight)), category);
  return out;
}

}  // namespace seaget
