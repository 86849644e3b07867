#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace umx::rng {

// splitmix64 finalizer; used for seed mixing so that derived streams are
// decorrelated even for adjacent inputs.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Child seed = hash(root, purpose, index). Adding a pipeline stage with a new
// purpose tag never perturbs the streams of existing stages.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index = 0) {
  return mix(mix(root ^ fnv1a(purpose)) + index);
}

// mt19937_64 with hand-rolled distributions. The engine's output sequence is
// pinned by the standard; std::*_distribution mappings are not, so we map
// outputs ourselves to keep results identical across toolchains.
class Rand {
 public:
  explicit Rand(std::uint64_t seed) : eng_(mix(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0,1) with 53-bit resolution
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform integer in [lo, hi], inclusive; unbiased via rejection
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t u;
    do {
      u = next_u64();
    } while (u >= limit);
    return lo + static_cast<std::int64_t>(u % range);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller without the cached spare: two engine draws per call, so the
  // stream position is a pure function of the call count.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // multiplicative lognormal factor with mean 1 and the given coefficient of
  // variation; cov = 0 yields exactly 1
  double lognormal_factor(double cov) {
    if (cov <= 0.0) return 1.0;
    const double s2 = std::log1p(cov * cov);
    return std::exp(-0.5 * s2 + std::sqrt(s2) * normal());
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace umx::rng
