#pragma once

#include <cmath>
#include <cstdint>

namespace skmfc {

/// Counter-based deterministic random numbers: every variate is a pure
/// function of (seed, replication, particle, step, channel), so trajectories
/// are bitwise reproducible regardless of evaluation order, and streams can
/// be cut arbitrarily across workers.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t replication, std::uint64_t particle,
                         std::uint64_t step, std::uint64_t channel) {
    std::uint64_t h = splitmix64(seed ^ 0xA0761D6478BD642FULL);
    h = splitmix64(h ^ replication);
    h = splitmix64(h ^ particle);
    h = splitmix64(h ^ step);
    h = splitmix64(h ^ channel);
    return h;
}

/// Uniform in the open interval (0,1).
inline double uniform(std::uint64_t seed, std::uint64_t replication, std::uint64_t particle,
                      std::uint64_t step, std::uint64_t channel) {
    return (static_cast<double>(mix(seed, replication, particle, step, channel) >> 11) + 0.5) *
           0x1.0p-53;
}

/// Standard normal via Box-Muller on two counter uniforms.
inline double normal(std::uint64_t seed, std::uint64_t replication, std::uint64_t particle,
                     std::uint64_t step, std::uint64_t channel) {
    const double u1 = uniform(seed, replication, particle, step, 2 * channel);
    const double u2 = uniform(seed, replication, particle, step, 2 * channel + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace rng
}  // namespace skmfc
