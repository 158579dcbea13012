#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace lightsb {

/// Counter-based generator: the n-th output of a stream is a pure function of
/// (key, n), so a stream can be re-derived for any (seed, particle) pair and
/// parallel and serial code paths draw identical numbers.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_(mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ ^ mix64(counter_++ * 0x9E3779B97F4A7C15ULL)); }

  /// Independent child stream. Does not advance this generator.
  [[nodiscard]] CounterRng substream(std::uint64_t id) const noexcept { return CounterRng(key_, id); }

  /// Draws a fresh base key; children derived from it via substream(i) give
  /// one stream per work item independent of how the work is scheduled.
  [[nodiscard]] CounterRng fork() noexcept { return CounterRng((*this)(), 0); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_pos() noexcept { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  /// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = (*this)();
      const __uint128_t m = static_cast<__uint128_t>(x) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lightsb
