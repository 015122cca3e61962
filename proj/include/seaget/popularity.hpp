#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "seaget/dataio.hpp"

namespace seaget {

/// alpha weighs unique-user counts against check-in counts; beta weighs the
/// recent window against the past. Check-ins at or after `recent_cutoff`
/// (local time) count as recent.
struct PopularityParams {
  double alpha = 0.5;
  double beta = 0.5;
  std::int64_t recent_cutoff = 0;
};

struct PoiPopularity {
  std::size_t users_recent = 0;
  std::size_t checkins_recent = 0;
  std::size_t users_past = 0;
  std::size_t checkins_past = 0;
  double raw = 0.0;
  double norm = 0.0;  // min-max over all POIs, 0.5 everywhere on a tie
};

struct PopularityStats {
  PopularityParams params;
  std::vector<PoiPopularity> pois;
};

inline constexpr std::int64_t kDefaultRecentWindow = 90LL * 86400;

/// End of the training span (latest local timestamp) minus `window`.
std::int64_t default_recent_cutoff(std::span<const CheckIn> train_checkins,
                                   std::int64_t window = kDefaultRecentWindow);

/// beta * (alpha * users_recent + (1 - alpha) * checkins_recent)
///   + (1 - beta) * (alpha * users_past + (1 - alpha) * checkins_past)
double popularity_score(double alpha, double beta, double users_recent, double checkins_recent,
                        double users_past, double checkins_past) noexcept;

PopularityStats compute_popularity(std::span<const CheckIn> train_checkins, std::size_t poi_count,
                                   const PopularityParams& params);

struct PopularityGridCell {
  double alpha = 0.0;
  double beta = 0.0;
  PopularityStats stats;
};

/// One independently computed table per (alpha, beta), alpha-major order.
std::vector<PopularityGridCell> sweep_grid(std::span<const CheckIn> train_checkins,
                                           std::size_t poi_count, std::span<const double> alphas,
                                           std::span<const double> betas,
                                           std::int64_t recent_cutoff);

/// poi_id,users_recent,checkins_recent,users_past,checkins_past,popularity_raw,popularity_norm
void write_popularity_csv(std::ostream& out, const PopularityStats& stats);

}  // namespace seaget
