#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "acr/matrix.hpp"

namespace acr {

//! Deterministic random stream: xoshiro256++ seeded through splitmix64 from
//! (master_seed, stream_index). The same pair always reproduces the same
//! draw sequence, independent of host, thread schedule, or other streams.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t sm = master_seed ^ (0x9E3779B97F4A7C15ULL * (stream_index + 1));
    for (auto& word : state_) word = splitmix64(sm);
    bool all_zero = true;
    for (auto word : state_)
      if (word != 0) all_zero = false;
    if (all_zero) state_[0] = 0x1ULL;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  //! Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  //! Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(angle);
    have_cached_ = true;
    return r * std::cos(angle);
  }

  //! Exponential(1) by inverse CDF; exact for the Gamma(1) case.
  double exponential() { return -std::log1p(-uniform01()); }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

//! Draw from N(0, sigma) given the lower Cholesky factor of sigma.
inline Vector mvn_draw(const Matrix& chol_lower, RngStream& rng) {
  const std::size_t d = chol_lower.rows();
  Vector z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal();
  Vector x(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) x[i] += chol_lower(i, j) * z[j];
  return x;
}

}  // namespace acr
