#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace seaget {

/// Independent random streams derived from one seed. Disabling one consumer
/// (e.g. dropout) never shifts the draws seen by another (e.g. shuffling).
enum class RngStream : std::uint64_t {
  init = 1,
  dropout = 2,
  shuffle = 3,
  split = 4,
  test = 99,
};

/// Counter-based generator: draw n is a SplitMix64 finalization of
/// (seed, stream, n). Output depends only on integer arithmetic, so the
/// sequence is identical on every platform.
class Rng {
 public:
  Rng() = default;
  Rng(std::uint64_t seed, RngStream stream) noexcept
      : seed_(seed), stream_(static_cast<std::uint64_t>(stream)) {}
  Rng(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (both halves drawn per call, no caching).
  double normal() noexcept;
  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }
  void set_counter(std::uint64_t c) noexcept { counter_ = c; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace seaget
