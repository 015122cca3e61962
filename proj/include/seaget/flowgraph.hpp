#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

#include "seaget/dataio.hpp"
#include "seaget/popularity.hpp"
#include "seaget/sparse.hpp"
#include "seaget/tensor.hpp"

namespace seaget {

/// transition_count: w(p1, p2) = number of p1 -> p2 steps in training.
/// popularity_product: that count times the mean popularity_norm of the two
/// endpoints (ablation variant; edges between zero-popularity POIs vanish).
enum class EdgeWeighting { transition_count, popularity_product };

struct NodeAttributes {
  double lat = 0.0;
  double lon = 0.0;
  std::size_t category_id = 0;
  double popularity_norm = 0.0;
};

/// Attributed weighted directed graph over the training POIs.
struct TrajectoryFlowMap {
  std::vector<NodeAttributes> nodes;
  std::size_t category_count = 0;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;

  std::size_t node_count() const noexcept { return nodes.size(); }
};

TrajectoryFlowMap build_flow_map(const std::vector<Trajectory>& train, const PoiCatalog& catalog,
                                 const PopularityStats& popularity,
                                 EdgeWeighting weighting = EdgeWeighting::transition_count);

/// Rows are [one-hot category | popularity_norm | lat_norm | lon_norm];
/// lat/lon are min-max scaled over the nodes (0.5 when all equal).
Tensor node_features(const TrajectoryFlowMap& map);

CsrMatrix adjacency(const TrajectoryFlowMap& map);

/// (D + I)^-1 (A + I) with D the row-sum (out-degree) diagonal of A.
Tensor normalized_laplacian(const Tensor& a);
CsrMatrix normalized_laplacian(const CsrMatrix& a);

/// Static graph operators consumed by the GCN and the transition attention.
struct GraphMatrices {
  CsrMatrix adjacency;
  CsrMatrix laplacian;
  Tensor features;
  CsrMatrix laplacian_features;  // laplacian * features, precomputed

  std::size_t node_count() const noexcept { return features.rows(); }
  std::size_t feature_width() const noexcept { return features.cols(); }
};

GraphMatrices build_graph_matrices(const TrajectoryFlowMap& map);
GraphMatrices build_graph_matrices(const CsrMatrix& adjacency, Tensor features);

/// src,dst,weight
void write_edges_csv(std::ostream& out, const TrajectoryFlowMap& map);
/// poi_id,lat,lon,category_id,popularity_norm,out_degree
void write_nodes_csv(std::ostream& out, const TrajectoryFlowMap& map);

}  // namespace seaget
