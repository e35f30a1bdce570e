#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "ddkf/numerics.hpp"

namespace ddkf {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used to derive
/// independent sub-seeds so that adding trials or streams never perturbs
/// existing ones.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for trial `index` of a run seeded with `seed`.
[[nodiscard]] constexpr std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed ^ splitmix64(index + 1));
}

/// Named sub-streams of a trial, so that e.g. the measurement draws do not
/// depend on how many draws the topology generator consumed.
enum class Stream : std::uint64_t {
  kTopology = 1,
  kPartition = 2,
  kNoiseVariance = 3,
  kTruth = 4,
  kMeasurement = 5,
};

[[nodiscard]] constexpr std::uint64_t stream_seed(std::uint64_t trial, Stream s) noexcept {
  return splitmix64(trial ^ splitmix64(0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(s)));
}

/// Seeded generator. Wraps mt19937_64 (whose output sequence the standard
/// fixes) with hand-rolled uniform/normal transforms, since the standard
/// distributions are implementation-defined and would break bit-exact output
/// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) noexcept {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vector standard_normal(std::size_t dim) noexcept {
    Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Draw from N(0, cov) for a PSD covariance. Uses the Cholesky factor when
/// it exists and falls back to per-coordinate scaling for diagonal
/// (possibly singular) covariances.
[[nodiscard]] inline Vector gaussian(Rng& rng, const Matrix& cov) {
  const std::size_t n = cov.rows();
  bool diagonal = true;
  for (std::size_t i = 0; i < n && diagonal; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && cov(i, j) != 0.0) {
        diagonal = false;
        break;
      }
  Vector z = rng.standard_normal(n);
  if (diagonal) {
    for (std::size_t i = 0; i < n; ++i) z[i] *= std::sqrt(std::max(cov(i, i), 0.0));
    return z;
  }
  return mat_vec(cholesky(cov, "noise covariance"), z);
}

}  // namespace ddkf
