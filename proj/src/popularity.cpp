#include "seaget/popularity.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_set>

#include "seaget/errors.hpp"
#include "seaget/text.hpp"

namespace seaget {

std::int64_t default_recent_cutoff(std::span<const CheckIn> train_checkins, std::int64_t window) {
  if (train_checkins.empty()) throw DegenerateError("popularity: empty training set");
  std::int64_t last = train_checkins.front().local_timestamp();
  std::int64_t first = last;
  for (const auto& c : train_checkins) {
    last = std::max(last, c.local_timestamp());
    first = std::min(first, c.local_timestamp());
  }
  return std::max(first, last - window);
}

double popularity_score(double alpha, double beta, double users_recent, double checkins_recent,
                        double users_past, double checkins_past) noexcept {
  return beta * (alpha * users_recent + (1.0 - alpha) * checkins_recent) +
         (1.0 - beta) * (alpha * users_past + (1.0 - alpha) * checkins_past);
}

PopularityStats compute_popularity(std::span<const CheckIn> train_checkins, std::size_t poi_count,
                                   const PopularityParams& params) {
  if (train_checkins.empty()) throw DegenerateError("popularity: empty training set");
  if (params.alpha < 0.0 || params.alpha > 1.0 || params.beta < 0.0 || params.beta > 1.0)
    throw ContractError("popularity: alpha and beta must lie in [0, 1]");
  std::int64_t first = train_checkins.front().local_timestamp();
  std::int64_t last = first;
  for (const auto& c : train_checkins) {
    first = std::min(first, c.local_timestamp());
    last = std::max(last, c.local_timestamp());
  }
  if (params.recent_cutoff < first || params.recent_cutoff > last)
    throw ContractError("popularity: recent_cutoff lies outside the training time span");

  PopularityStats stats;
  stats.params = params;
  stats.pois.resize(poi_count);
  std::vector<std::unordered_set<std::size_t>> recent_users(poi_count), past_users(poi_count);
  for (const auto& c : train_checkins) {
    if (c.poi_id >= poi_count) throw ContractError("popularity: poi id out of range");
    auto& p = stats.pois[c.poi_id];
    if (c.local_timestamp() >= params.recent_cutoff) {
      ++p.checkins_recent;
      recent_users[c.poi_id].insert(c.user_id);
    } else {
      ++p.checkins_past;
      past_users[c.poi_id].insert(c.user_id);
    }
  }
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < poi_count; ++i) {
    auto& p = stats.pois[i];
    p.users_recent = recent_users[i].size();
    p.users_past = past_users[i].size();
    p.raw = popularity_score(params.alpha, params.beta, static_cast<double>(p.users_recent),
                             static_cast<double>(p.checkins_recent),
                             static_cast<double>(p.users_past),
                             static_cast<double>(p.checkins_past));
    lo = i == 0 ? p.raw : std::min(lo, p.raw);
    hi = i == 0 ? p.raw : std::max(hi, p.raw);
  }
  for (auto& p : stats.pois) p.norm = hi > lo ? (p.raw - lo) / (hi - lo) : 0.5;
  return stats;
}

std::vector<PopularityGridCell> sweep_grid(std::span<const CheckIn> train_checkins,
                                           std::size_t poi_count, std::span<const double> alphas,
                                           std::span<const double> betas,
                                           std::int64_t recent_cutoff) {
  if (alphas.empty() || betas.empty()) throw ContractError("sweep_grid: empty grid");
  std::vector<PopularityGridCell> out;
  for (double a : alphas)
    for (double b : betas)
      out.push_back({a, b, compute_popularity(train_checkins, poi_count, {a, b, recent_cutoff})});
  return out;
}

void write_popularity_csv(std::ostream& out, const PopularityStats& stats) {
  out << "poi_id,users_recent,checkins_recent,users_past,checkins_past,popularity_raw,"
         "popularity_norm\n";
  for (std::size_t i = 0; i < stats.pois.size(); ++i) {
    const auto& p = stats.pois[i];
    out << i << ',' << p.users_recent << ',' << p.checkins_recent << ',' << p.users_past << ','
        << p.checkins_past << ',' << format_double(p.raw) << ',' << format_double(p.norm) << '\n';
  }
}

}  // namespace seaget
