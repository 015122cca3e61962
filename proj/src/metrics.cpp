#include "seaget/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>

#include "seaget/errors.hpp"

namespace seaget {

std::size_t rank_of(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) {
    throw ContractError("rank_of: target " + std::to_string(target) + " outside " +
                        std::to_string(scores.size()) + " scores");
  }
  const double t = scores[target];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > t || (scores[i] == t && i < target)) ++rank;
  }
  return rank;
}

double EvalReport::acc(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return accuracy[i];
  }
  throw ContractError("Acc@" + std::to_string(k) + " was not evaluated");
}

MetricAccumulator::MetricAccumulator(std::vector<std::size_t> ks) : ks_(std::move(ks)) {
  if (ks_.empty()) throw ContractError("at least one cutoff k is required");
  for (auto k : ks_) {
    if (k == 0) throw ContractError("cutoff k must be positive");
  }
  hits_.assign(ks_.size(), 0);
}

void MetricAccumulator::add(std::size_t rank) {
  if (rank == 0) throw ContractError("ranks start at 1");
  for (std::size_t i = 0; i < ks_.size(); ++i) {
    if (rank <= ks_[i]) ++hits_[i];
  }
  reciprocal_sum_ += 1.0 / static_cast<double>(rank);
  ++count_;
}

EvalReport MetricAccumulator::report() const {
  if (count_ == 0) throw DegenerateError("no predictions to evaluate");
  EvalReport r;
  r.ks = ks_;
  r.count = count_;
  const double n = static_cast<double>(count_);
  for (auto h : hits_) r.accuracy.push_back(static_cast<double>(h) / n);
  r.mrr = reciprocal_sum_ / n;
  return r;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  for (auto k : report.ks) out << "acc@" << k << ',';
  out << "mrr,count\n";
  out << std::setprecision(6) << std::fixed;
  for (double a : report.accuracy) out << a << ',';
  out << report.mrr << ',' << report.count << '\n';
  out.unsetf(std::ios::floatfield);
}

void print_report_table(std::ostream& out, const EvalReport& report) {
  for (auto k : report.ks) out << std::setw(9) << ("Acc@" + std::to_string(k));
  out << std::setw(9) << "MRR" << std::setw(10) << "count" << '\n';
  out << std::fixed << std::setprecision(4);
  for (double a : report.accuracy) out << std::setw(9) << a;
  out << std::setw(9) << report.mrr << std::setw(10) << report.count << '\n';
  out.unsetf(std::ios::floatfield);
}

}  // namespace seaget
