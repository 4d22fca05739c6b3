#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace warpu {

// Counter-based generator. Output n is a SplitMix64 finalizer applied to
// hashed_key + n * golden, so a stream is fully described by (key, counter)
// and two streams with different keys sit at unrelated offsets.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) : key_(key), base_(mix(key ^ 0x6a09e667f3bcc909ULL)) {}

  // Replicate r of a run seeded with `seed` uses key seed ^ r.
  static CounterRng for_replicate(std::uint64_t seed, std::uint64_t replicate) {
    return CounterRng(seed ^ replicate);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(base_ + (counter_++) * kGolden); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void discard(std::uint64_t n) { counter_ += n; }

  // Independent child stream, e.g. one per chain inside a replicate.
  CounterRng split(std::uint64_t tag) const { return CounterRng(mix(key_ + 0x9e3779b97f4a7c15ULL * (tag + 1))); }

  // (0, 1], never returns 0 so log(u) is finite.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  double normal() {
    // Box-Muller, second variate dropped so the generator carries no cache.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }

  double gamma(double shape, double scale = 1.0) { return std::gamma_distribution<double>(shape, scale)(*this); }

  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace warpu
