#pragma once

#include <cmath>
#include <cstdint>

namespace cwnet {

// splitmix64; fixed algorithm so streams are identical across platforms and
// standard library versions (std::uniform_* distributions are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // inclusive bounds; Lemire multiply-shift, rejects the biased low lane
  int uniform_int(int lo, int hi) {
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t threshold = (0ull - range) % range;
    while (true) {
      __uint128_t m = static_cast<__uint128_t>(next_u64()) * range;
      if (static_cast<std::uint64_t>(m) >= threshold)
        return lo + static_cast<int>(static_cast<std::uint64_t>(m >> 64));
    }
  }

  // [0, 1) with 53-bit mantissa
  double uniform_real() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  bool bernoulli(double p) { return uniform_real() < p; }

  // Box-Muller, pairs cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_real();
    double u2 = uniform_real();
    while (u1 <= 0.0) u1 = uniform_real();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// independent child stream for item `index` of a keyed collection
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base ^ (index * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace cwnet
