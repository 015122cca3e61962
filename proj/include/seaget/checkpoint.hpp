#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "seaget/model.hpp"

namespace seaget {

/// Run settings stored next to the weights.
struct CheckpointMeta {
  double alpha = 0.5;
  double beta = 0.33;
  std::int64_t recent_cutoff = 0;
  std::uint64_t seed = 0;
  std::string edge_weighting = "transition_count";
  std::size_t epoch = 0;
  double validation_loss = 0.0;
  std::uint64_t dropout_rng_counter = 0;
  std::uint64_t shuffle_rng_counter = 0;
};

struct Checkpoint {
  ModelState model;
  CheckpointMeta meta;
};

/// Layout: 8-byte magic "SEAGETCK", little-endian u64 header length, a JSON
/// header (config, meta, and name/rows/cols/offset per tensor), then every
/// tensor as row-major little-endian f64 in header order.
void save_checkpoint(const std::filesystem::path& path, ModelState& model, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Dense matrix export: magic "SGMX", u32 dtype (1 = f64), u64 rows,
/// u64 cols, row-major payload. All little-endian.
void write_matrix(const std::filesystem::path& path, const Tensor& m);
Tensor read_matrix(const std::filesystem::path& path);

}  // namespace seaget
