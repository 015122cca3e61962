#include "seaget/flowgraph.hpp"

#include <algorithm>
#include <ostream>

#include "seaget/errors.hpp"
#include "seaget/text.hpp"

namespace seaget {

TrajectoryFlowMap build_flow_map(const std::vector<Trajectory>& train, const PoiCatalog& catalog,
                                 const PopularityStats& popularity, EdgeWeighting weighting) {
  if (train.empty()) throw DegenerateError("flow map: empty training split");
  if (popularity.pois.size() != catalog.poi_count())
    throw ContractError("flow map: popularity table does not cover the catalog");
  TrajectoryFlowMap map;
  map.category_count = catalog.category_count();
  map.nodes.reserve(catalog.poi_count());
  for (std::size_t i = 0; i < catalog.poi_count(); ++i) {
    const PoiInfo& p = catalog.pois[i];
    map.nodes.push_back({p.lat, p.lon, p.category_id, popularity.pois[i].norm});
  }
  for (const auto& t : train) {
    for (std::size_t i = 1; i < t.checkins.size(); ++i) {
      const std::size_t from = t.checkins[i - 1].poi_id;
      const std::size_t to = t.checkins[i].poi_id;
      if (from >= map.node_count() || to >= map.node_count())
        throw ContractError("flow map: poi id outside the catalog");
      map.edges[{from, to}] += 1.0;
    }
  }
  if (weighting == EdgeWeighting::popularity_product) {
    for (auto& [edge, w] : map.edges) {
      w *= 0.5 * (map.nodes[edge.first].popularity_norm + map.nodes[edge.second].popularity_norm);
    }
    std::erase_if(map.edges, [](const auto& e) { return e.second <= 0.0; });
  }
  return map;
}

Tensor node_features(const TrajectoryFlowMap& map) {
  const std::size_t n = map.node_count();
  const std::size_t c = map.category_count;
  Tensor x(n, c + 3);
  if (n == 0) return x;
  auto [lat_lo, lat_hi] = std::minmax_element(map.nodes.begin(), map.nodes.end(),
                                              [](auto& a, auto& b) { return a.lat < b.lat; });
  auto [lon_lo, lon_hi] = std::minmax_element(map.nodes.begin(), map.nodes.end(),
                                              [](auto& a, auto& b) { return a.lon < b.lon; });
  auto scale = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = map.nodes[i];
    if (a.category_id >= c) throw ContractError("node_features: category id out of range");
    x(i, a.category_id) = 1.0;
    x(i, c) = a.popularity_norm;
    x(i, c + 1) = scale(a.lat, lat_lo->lat, lat_hi->lat);
    x(i, c + 2) = scale(a.lon, lon_lo->lon, lon_hi->lon);
  }
  return x;
}

CsrMatrix adjacency(const TrajectoryFlowMap& map) {
  CsrMatrix a;
  a.rows = a.cols = map.node_count();
  a.row_ptr.assign(a.rows + 1, 0);
  for (const auto& [edge, w] : map.edges) {
    ++a.row_ptr[edge.first + 1];
    a.col_idx.push_back(edge.second);  // std::map order is row-major sorted
    a.values.push_back(w);
  }
  for (std::size_t i = 0; i < a.rows; ++i) a.row_ptr[i + 1] += a.row_ptr[i];
  return a;
}

Tensor normalized_laplacian(const Tensor& a) {
  if (a.rows() != a.cols()) throw ShapeError("normalized_laplacian: adjacency must be square, got " + shape_string(a));
  const std::size_t n = a.rows();
  Tensor l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) < 0.0) throw ContractError("normalized_laplacian: negative edge weight");
      degree += a(i, j);
    }
    const double inv = 1.0 / (degree + 1.0);
    for (std::size_t j = 0; j < n; ++j) l(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) * inv;
  }
  return l;
}

CsrMatrix normalized_laplacian(const CsrMatrix& a) {
  if (a.rows != a.cols) throw ShapeError("normalized_laplacian: adjacency must be square");
  CsrMatrix l;
  l.rows = l.cols = a.rows;
  l.row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double degree = 0.0;
    bool has_diag = false;
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      if (a.values[k] < 0.0) throw ContractError("normalized_laplacian: negative edge weight");
      degree += a.values[k];
      has_diag = has_diag || a.col_idx[k] == i;
    }
    const double inv = 1.0 / (degree + 1.0);
    bool placed_diag = has_diag;
    for (std::size_t k = a.row_ptr[i]; k <= a.row_ptr[i + 1]; ++k) {
      const bool end = k == a.row_ptr[i + 1];
      if (!placed_diag && (end || a.col_idx[k] > i)) {
        l.col_idx.push_back(i);
        l.values.push_back(inv);
        placed_diag = true;
      }
      if (end) break;
      const std::size_t j = a.col_idx[k];
      l.col_idx.push_back(j);
      l.values.push_back((a.values[k] + (j == i ? 1.0 : 0.0)) * inv);
    }
    l.row_ptr.push_back(l.values.size());
  }
  return l;
}

GraphMatrices build_graph_matrices(const CsrMatrix& adj, Tensor features) {
  if (adj.rows != features.rows())
    throw ShapeError("graph: adjacency and feature row counts differ");
  GraphMatrices g;
  g.adjacency = adj;
  g.laplacian = normalized_laplacian(adj);
  g.laplacian_features = spgemm(g.laplacian, CsrMatrix::from_dense(features));
  g.features = std::move(features);
  return g;
}

GraphMatrices build_graph_matrices(const TrajectoryFlowMap& map) {
  return build_graph_matrices(adjacency(map), node_features(map));
}

void write_edges_csv(std::ostream& out, const TrajectoryFlowMap& map) {
  out << "src,dst,weight\n";
  for (const auto& [edge, w] : map.edges)
    out << edge.first << ',' << edge.second << ',' << format_double(w) << '\n';
}

void write_nodes_csv(std::ostream& out, const TrajectoryFlowMap& map) {
  std::vector<std::size_t> out_degree(map.node_count(), 0);
  for (const auto& [edge, w] : map.edges) ++out_degree[edge.first];
  out << "poi_id,lat,lon,category_id,popularity_norm,out_degree\n";
  for (std::size_t i = 0; i < map.node_count(); ++i) {
    const auto& a = map.nodes[i];
    out << i << ',' << format_double(a.lat) << ',' << format_double(a.lon) << ','
        << a.category_id << ',' << format_double(a.popularity_norm) << ',' << out_degree[i] << '\n';
  }
}

}  // namespace seaget
