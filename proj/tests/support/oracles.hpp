#pragma once

// Brute-force reference implementations. Each one recomputes a quantity
// from its definition with a different algorithm than the library uses.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "seaget/dataio.hpp"
#include "seaget/tensor.hpp"

namespace seaget::testing {

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

struct CountOracle {
  std::size_t users_recent = 0, checkins_recent = 0, users_past = 0, checkins_past = 0;
};

/// Scans the whole log once per POI.
inline std::vector<CountOracle> popularity_counts(const std::vector<CheckIn>& log, std::size_t pois,
                                                  std::int64_t cutoff) {
  std::vector<CountOracle> out(pois);
  for (std::size_t p = 0; p < pois; ++p) {
    std::set<std::size_t> recent, past;
    for (const auto& c : log) {
      if (c.poi_id != p) continue;
      if (c.local_timestamp() >= cutoff) {
        recent.insert(c.user_id);
        ++out[p].checkins_recent;
      } else {
        past.insert(c.user_id);
        ++out[p].checkins_past;
      }
    }
    out[p].users_recent = recent.size();
    out[p].users_past = past.size();
  }
  return out;
}

/// Every ordered pair of consecutive check-ins, counted per trajectory.
inline std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_counts(
    const std::vector<Trajectory>& trajs) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> out;
  for (const auto& t : trajs) {
    std::vector<std::size_t> seq;
    for (const auto& c : t.checkins) seq.push_back(c.poi_id);
    for (std::size_t i = 1; i < seq.size(); ++i) out[{seq[i - 1], seq[i]}] += 1;
  }
  return out;
}

/// Sorts ids by (score desc, id asc) and returns the 1-based position of target.
inline std::size_t sorted_rank(const std::vector<double>& scores, std::size_t target) {
  std::vector<std::size_t> ids(scores.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  for (std::size_t r = 0; r < ids.size(); ++r)
    if (ids[r] == target) return r + 1;
  return 0;
}

}  // namespace seaget::testing
