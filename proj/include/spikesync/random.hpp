#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Core>

namespace spikesync {

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
} // namespace detail

/// Seed for the k-th independent stream derived from a base seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t k) {
  return detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(k + 0x5851f42d4c957f2dULL));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t k) { return Rng(split_seed(seed, k)); }

/// Uniform on the open interval (0, 1); never returns 0 so log() is safe.
template <class R>
double uniform01(R& rng) {
  constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * scale;
    if (u > 0.0) return u;
  }
}

template <class R>
double uniform(R& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller without cached state, so copies of an
/// engine always produce identical streams.
template <class R>
double standard_normal(R& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <class R>
Eigen::VectorXd standard_normal_vector(R& rng, Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = standard_normal(rng);
  return z;
}

template <class R>
bool bernoulli(R& rng, double p) {
  return uniform01(rng) < p;
}

} // namespace spikesync
