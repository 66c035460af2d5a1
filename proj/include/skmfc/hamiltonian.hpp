#pragma once

#include <array>
#include <cmath>

#include "skmfc/errors.hpp"

namespace skmfc {

struct TruncatedHamiltonian {
    double value = 0.0;
    std::array<double, 2> maximizer{0.0, 0.0};   // optimal control for momentum p
};

/// H^R(p) = sup_{|a|<=R} ( -a.p - 1/2 |a|^2 )
///        = 1/2 |p|^2          when |p| <= R
///        = R |p| - 1/2 R^2    otherwise,
/// with maximizer a* = -p clipped to the ball of radius R. Continuous and C^1
/// across |p| = R; both branches give R^2/2 there.
inline TruncatedHamiltonian truncated_hamiltonian(std::array<double, 2> p, int dim, double radius) {
    if (!(radius > 0.0)) throw ConfigError("truncated_hamiltonian: radius must be positive");
    const double p2 = dim == 1 ? p[0] * p[0] : p[0] * p[0] + p[1] * p[1];
    const double norm = std::sqrt(p2);
    TruncatedHamiltonian out;
    if (norm <= radius) {
        out.value = 0.5 * p2;
        out.maximizer = {-p[0], dim == 2 ? -p[1] : 0.0};
    } else {
        out.value = radius * norm - 0.5 * radius * radius;
        const double s = radius / norm;
        out.maximizer = {-p[0] * s, dim == 2 ? -p[1] * s : 0.0};
    }
    return out;
}

/// Scalar helpers for the solver hot loops (d = 1 and per-axis d = 2 use).
inline double hr_value(double p2, double radius) {
    const double norm = std::sqrt(p2);
    return norm <= radius ? 0.5 * p2 : radius * norm - 0.5 * radius * radius;
}

inline double hr_clip_factor(double p2, double radius) {
    const double norm = std::sqrt(p2);
    return norm <= radius ? 1.0 : radius / norm;
}

}  // namespace skmfc
