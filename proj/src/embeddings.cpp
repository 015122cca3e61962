#include "seaget/embeddings.hpp"

#include <array>

#include "seaget/dataio.hpp"
#include "seaget/errors.hpp"
#include "seaget/init.hpp"

namespace seaget {

FusionLayer FusionLayer::init(const std::string& name, std::size_t width, Rng& rng) {
  return {uniform_weight(name + ".w", width, width, rng), zero_bias(name + ".b", width)};
}

Var fuse(Tape& tape, FusionLayer& layer, Var left, Var right, double slope) {
  if (left.cols() + right.cols() != layer.width())
    throw ContractError("fuse: inputs of width " + std::to_string(left.cols()) + "+" +
                        std::to_string(right.cols()) + " do not fit a " +
                        std::to_string(layer.width()) + "-wide fusion layer");
  const std::array<Var, 2> parts{left, right};
  Var z = ad::matmul(ad::concat_cols(parts), tape.param(layer.weight));
  return ad::leaky_relu(ad::add_bias(z, tape.param(layer.bias)), slope);
}

EmbeddingTables EmbeddingTables::init(std::size_t users, std::size_t categories,
                                      const EmbeddingWidths& widths, Rng& rng) {
  EmbeddingTables t;
  t.widths = widths;
  t.user = embedding_table("emb.user", users, widths.poi, rng);
  t.category = embedding_table("emb.category", categories, widths.time, rng);
  t.season = embedding_table("emb.season", kSeasonCount, widths.season, rng);
  t.time_frequency = embedding_table("emb.time_frequency", 1, widths.time, rng);
  t.time_phase = embedding_table("emb.time_phase", 1, widths.time, rng);
  t.poi_user = FusionLayer::init("fuse.poi_user", 2 * widths.poi, rng);
  t.time_category = FusionLayer::init("fuse.time_category", 2 * widths.time, rng);
  t.season_poi = FusionLayer::init("fuse.season_poi", 2 * widths.season, rng);
  if (widths.season != widths.poi)
    t.poi_to_season = uniform_weight("emb.poi_to_season", widths.poi, widths.season, rng);
  return t;
}

Var time2vec(Tape& tape, EmbeddingTables& tables, const Tensor& t_norm) {
  if (t_norm.cols() != 1) throw ShapeError("time2vec: expects a column of times");
  for (double t : t_norm.values())
    if (!(t >= 0.0 && t < 1.0)) throw ContractError("time2vec: normalized time must lie in [0, 1)");
  Var lin = ad::matmul(tape.constant(t_norm), tape.param(tables.time_frequency));
  return ad::periodic(ad::add_bias(lin, tape.param(tables.time_phase)));
}

CheckinParts checkin_embedding(Tape& tape, EmbeddingTables& tables, Var poi_embeddings,
                               const CheckinContext& ctx) {
  const std::size_t k = ctx.size();
  if (k == 0 || ctx.categories.size() != k || ctx.seasons.size() != k || ctx.t_norm.size() != k)
    throw ContractError("checkin_embedding: context arrays must be non-empty and equally long");
  if (ctx.user >= tables.user.value.rows())
    throw ContractError("checkin_embedding: unknown user " + std::to_string(ctx.user));
  for (std::size_t i = 0; i < k; ++i) {
    if (ctx.pois[i] >= poi_embeddings.rows())
      throw ContractError("checkin_embedding: unknown poi " + std::to_string(ctx.pois[i]));
    if (ctx.categories[i] >= tables.category.value.rows())
      throw ContractError("checkin_embedding: unknown category " + std::to_string(ctx.categories[i]));
    if (ctx.seasons[i] >= kSeasonCount)
      throw ContractError("checkin_embedding: season id out of range");
  }
  const double slope = tables.leaky_slope;
  Var e_p = ad::gather_rows(poi_embeddings, ctx.pois);
  const std::vector<std::size_t> users(k, ctx.user);
  Var e_u = ad::gather_rows(tape.param(tables.user), users);
  Var e_pu = fuse(tape, tables.poi_user, e_p, e_u, slope);

  Var e_t = time2vec(tape, tables, Tensor::column_vector(ctx.t_norm));
  Var e_c = ad::gather_rows(tape.param(tables.category), ctx.categories);
  Var e_ct = fuse(tape, tables.time_category, e_t, e_c, slope);

  Var e_s = ad::gather_rows(tape.param(tables.season), ctx.seasons);
  Var e_p_season = tables.poi_to_season ? ad::matmul(e_p, tape.param(*tables.poi_to_season)) : e_p;
  Var e_sp = fuse(tape, tables.season_poi, e_s, e_p_season, slope);

  const std::array<Var, 3> blocks{e_pu, e_ct, e_sp};
  return {e_pu, e_ct, e_sp, ad::concat_cols(blocks)};
}

}  // namespace seaget
