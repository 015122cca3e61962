#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "seaget/autodiff.hpp"

namespace seaget {

/// sigma(W [left; right] + b) with a square W over the concatenated width.
struct FusionLayer {
  Parameter weight;
  Parameter bias;

  static FusionLayer init(const std::string& name, std::size_t width, Rng& rng);
  std::size_t width() const noexcept { return weight.value.rows(); }
};

Var fuse(Tape& tape, FusionLayer& layer, Var left, Var right, double slope = 0.2);

struct EmbeddingWidths {
  std::size_t poi = 128;     // width of the GCN output and the user table
  std::size_t time = 32;     // time encoding and category table
  std::size_t season = 32;   // season table

  std::size_t checkin() const noexcept { return 2 * poi + 2 * time + 2 * season; }
};

struct EmbeddingTables {
  EmbeddingWidths widths;
  Parameter user;           // M x poi
  Parameter category;       // |cat| x time
  Parameter season;         // 4 x season
  Parameter time_frequency; // 1 x time
  Parameter time_phase;     // 1 x time
  FusionLayer poi_user;
  FusionLayer time_category;
  FusionLayer season_poi;
  std::optional<Parameter> poi_to_season;  // poi x season, only when the widths differ
  double leaky_slope = 0.2;

  static EmbeddingTables init(std::size_t users, std::size_t categories,
                              const EmbeddingWidths& widths, Rng& rng);

  template <class F>
  void for_each_parameter(F&& f) {
    f(user);
    f(category);
    f(season);
    f(time_frequency);
    f(time_phase);
    f(poi_user.weight);
    f(poi_user.bias);
    f(time_category.weight);
    f(time_category.bias);
    f(season_poi.weight);
    f(season_poi.bias);
    if (poi_to_season) f(*poi_to_season);
  }
};

/// Learned temporal encoding of k times (k x 1, each in [0, 1)):
///   out[:, 0] = w0 t + p0, out[:, i] = sin(wi t + pi).
Var time2vec(Tape& tape, EmbeddingTables& tables, const Tensor& t_norm);

/// Context of k consecutive check-ins of one user.
struct CheckinContext {
  std::size_t user = 0;
  std::vector<std::size_t> pois;
  std::vector<std::size_t> categories;
  std::vector<std::size_t> seasons;
  std::vector<double> t_norm;

  std::size_t size() const noexcept { return pois.size(); }
};

struct CheckinParts {
  Var poi_user;        // k x 2*poi
  Var time_category;   // k x 2*time
  Var season_poi;      // k x 2*season
  Var combined;        // k x d, the three blocks side by side
};

/// e_q = [e_pu | e_ct | e_sp] for every check-in; `poi_embeddings` is the
/// current GCN output (N x poi).
CheckinParts checkin_embedding(Tape& tape, EmbeddingTables& tables, Var poi_embeddings,
                               const CheckinContext& ctx);

}  // namespace seaget
