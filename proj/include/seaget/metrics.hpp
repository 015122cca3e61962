#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace seaget {

/// 1 + #{scores above the target} + #{equal scores at a lower poi_id}.
std::size_t rank_of(std::span<const double> scores, std::size_t target);

/// Acc@k per cutoff and mean reciprocal rank over `count` predictions.
struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<double> accuracy;  // parallel to ks
  double mrr = 0.0;
  std::size_t count = 0;

  /// Throws ContractError for a k that was not evaluated.
  double acc(std::size_t k) const;
};

class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::vector<std::size_t> ks);

  void add(std::size_t rank);
  std::size_t count() const noexcept { return count_; }
  /// Throws DegenerateError when nothing was added.
  EvalReport report() const;

 private:
  std::vector<std::size_t> ks_;
  std::vector<std::size_t> hits_;
  double reciprocal_sum_ = 0.0;
  std::size_t count_ = 0;
};

/// Header "acc@1,...,mrr,count" followed by one row.
void write_report_csv(std::ostream& out, const EvalReport& report);
/// Aligned two-line table with the same column order.
void print_report_table(std::ostream& out, const EvalReport& report);

}  // namespace seaget
