#pragma once

#include <cstdint>
#include <string_view>

namespace seqrec::num {

// Counter-based generator: the n-th 64-bit word of a stream is
// splitmix64_finalize(key + n * 0x9E3779B97F4A7C15), where key is derived
// from (seed, stream). Uniform doubles take the top 53 bits. Normal variates
// use the Marsaglia polar method on consecutive uniform pairs, caching the
// second variate of each accepted pair.
//
// Any implementation that follows the above reproduces the same streams.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-counter+polar";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1).
  double uniform() noexcept;
  // Standard normal.
  double normal() noexcept;
  // Uniform integer on [0, n); n must be > 0. Uses the high word of a
  // 128-bit product (bias below 2^-64 * n).
  std::uint64_t below(std::uint64_t n) noexcept;

  // Independent stream keyed by (seed, stream id).
  Rng fork(std::uint64_t stream) const noexcept { return Rng(seed_, stream); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Named streams so that, e.g., adding a loss that consumes randomness never
// shifts the dropout or shuffling sequence of a run.
enum class RngStream : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kDropout = 3,
  kLoss = 4,
  kData = 5,
};

inline Rng make_rng(std::uint64_t seed, RngStream stream) noexcept {
  return Rng(seed, static_cast<std::uint64_t>(stream));
}

}  // namespace seqrec::num
