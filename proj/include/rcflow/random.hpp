#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "rcflow/latent.hpp"

namespace rcflow {

/// SplitMix64 (Steele, Lea, Flood 2014). A 64-bit counter-based generator: the state advances by
/// a fixed odd increment and each output is a bijective mix of the counter. Output depends only
/// on integer arithmetic, so streams are identical on every platform.
class SplitMix64 {
public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on (0, 1]: top 53 bits, offset by one ulp-step so that log() is always finite.
  double uniform_open0() noexcept { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t state_;
};

/// Independent stream seed for (seed, a, b), e.g. (run seed, step index, draw index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  std::uint64_t s = SplitMix64::mix(seed + 0x9e3779b97f4a7c15ULL);
  s = SplitMix64::mix(s ^ (a + 0x632be59bd9b4e019ULL));
  return SplitMix64::mix(s ^ (b + 0xd6e8feb86659fd93ULL));
}

/// Standard-normal field from SplitMix64(seed) via the Box-Muller transform. Consecutive uniform
/// pairs (u1, u2) produce the two variates r*cos(2*pi*u2), r*sin(2*pi*u2), r = sqrt(-2 ln u1),
/// written in row-major order.
inline LatentField sample_noise(std::uint64_t seed, const Shape& shape) {
  LatentField out(shape);
  auto o = out.values();
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < o.size(); i += 2) {
    const double u1 = rng.uniform_open0();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    o[i] = r * std::cos(theta);
    if (i + 1 < o.size()) o[i + 1] = r * std::sin(theta);
  }
  return out;
}

} // namespace rcflow
