// SPDX-License-Identifier: Apache-2.0
//
// Seeded random sources and the stateless seed-splitting rule used to derive
// independent per-trial streams (placement, combining matrices, channel,
// noise, data symbols). Gaussian variates are generated with Box-Muller on
// top of mt19937_64 so that draws are reproducible across standard libraries.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace moma {

// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Random streams consumed by one trial. A new stream tag never perturbs the
// draws of the existing ones.
enum class Stream : std::uint64_t {
  placement = 1,
  combining = 2,
  channel = 3,
  noise = 4,
  symbols = 5,
};

// Seed-splitting rule: seed(base, trial, stream) =
//   splitmix64(splitmix64(splitmix64(base) + trial) + stream_tag)
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t trial_index,
                                 Stream stream) {
  return splitmix64(splitmix64(splitmix64(base_seed) + trial_index) +
                    static_cast<std::uint64_t>(stream));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Equiprobable sign, +1 or -1.
  double sign() { return (gen_() >> 63) ? 1.0 : -1.0; }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Circularly symmetric complex Gaussian, total variance `variance`.
  std::complex<double> complex_gaussian(double variance) {
    const double scale = std::sqrt(variance / 2.0);
    const double re = gaussian();
    const double im = gaussian();
    return {scale * re, scale * im};
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace moma
