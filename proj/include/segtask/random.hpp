#pragma once

#include <cmath>
#include <cstdint>

namespace segtask {

// SplitMix64 mixing step. Bit-exact across platforms, which is what keeps
// datasets and parameter draws reproducible from a seed alone.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent substream seed, e.g. one per trajectory or per
// sweep cell, so parallel work never shares generator state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream ^ 0x6a09e667f3bcc909ULL));
}

// Small deterministic generator. The standard <random> distributions are
// implementation-defined, so sampling is done by hand on top of raw bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform on (0, 1]; never returns 0 so log() below is safe.
  double uniform01() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; one value per two uniforms, no cached state.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Inclusive bounds. Modulo bias is irrelevant at the ranges used here.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform01() <= p; }

  // Magnitude uniform on [min_abs, max_abs], sign fair.
  double signed_coefficient(double min_abs, double max_abs) {
    const double mag = uniform(min_abs, max_abs);
    return bernoulli(0.5) ? mag : -mag;
  }

 private:
  std::uint64_t state_;
};

}  // namespace segtask
