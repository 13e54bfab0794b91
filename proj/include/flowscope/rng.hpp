#pragma once

// Counter-based 64-bit generator.
//
// Every draw is a pure function of (key, counter): the key is derived from a
// user seed and a stream id, and the output is the SplitMix64 finalizer of
// key + counter * golden_gamma. Streams are split by hashing the stream id
// into the key, so stream k of seed s never depends on how many values other
// streams consumed. All derived quantities (bounded integers, Bernoulli
// trials) use integer arithmetic only.

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

namespace flowscope {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(splitmix64_mix(splitmix64_mix(seed) ^ (stream * 0xd1342543de82ef95ULL + 1))) {}

  /// Value at an explicit counter position; does not advance the generator.
  constexpr std::uint64_t at(std::uint64_t counter) const noexcept {
    return splitmix64_mix(key_ + (counter + 1) * kGamma);
  }

  constexpr std::uint64_t next() noexcept { return at(counter_++); }

  /// Uniform integer in [0, bound) via Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    __uint128_t m = static_cast<__uint128_t>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<__uint128_t>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Double in [0,1) from the top 53 bits; used only outside graph generation.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Integer acceptance threshold for a Bernoulli(p) trial against a raw 64-bit
/// draw. p >= 1 accepts everything (represented by the flag in the pair).
struct BernoulliThreshold {
  std::uint64_t threshold = 0;
  bool always = false;

  explicit BernoulliThreshold(double p) {
    if (p >= 1.0) {
      always = true;
    } else if (p > 0.0) {
      threshold = static_cast<std::uint64_t>(std::ldexp(p, 64));
    }
  }

  constexpr bool accept(std::uint64_t draw) const noexcept { return always || draw < threshold; }
};

template <class T>
void shuffle(std::span<T> values, CounterRng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace flowscope
