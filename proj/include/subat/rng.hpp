#pragma once

#include <cstdint>
#include <limits>

namespace subat {

// Counter-based random stream: draw k of a stream is a pure function of
// (seed, k), so any stream can be replayed from its (seed, counter) pair and
// split into independent child streams without shared state.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Child stream keyed by `key`; does not advance this stream.
  RngStream split(std::uint64_t key) const noexcept;

  std::uint64_t next_u64() noexcept;
  result_type operator()() noexcept { return next_u64(); }
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  double uniform() noexcept;                   // [0, 1)
  double uniform(double lo, double hi) noexcept;  // [lo, hi]
  double normal() noexcept;
  std::uint64_t below(std::uint64_t bound) noexcept;  // [0, bound)

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace subat
