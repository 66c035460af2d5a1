#pragma once

#include <array>
#include <cmath>

#include "skmfc/field.hpp"
#include "skmfc/grid.hpp"

namespace skmfc {

/// Order k of the Sobolev pairing used for dual-norm work. The inner product
/// is the unweighted sum over all derivative multi-indices j with |j| <= k,
///     <phi,psi>_k = sum_{|j|<=k} int D^j phi D^j psi dx,
/// whose Fourier multiplier is
///     m_k(n) = sum_{|j|<=k} prod_i (2 pi n_i)^{2 j_i}.
/// m_k(0) = 1, m_k >= 1, monotone in each |n_i|.
struct SobolevIndex {
    int k = 0;

    explicit SobolevIndex(int order) : k(order) {
        if (k < 0) throw std::invalid_argument("SobolevIndex: order must be >= 0");
    }

    /// Smallest order with the embedding margin needed for measure-flow
    /// estimates in dimension d: k > d/2 + 2.
    static SobolevIndex default_for_dim(int d) { return SobolevIndex(d == 1 ? 3 : 4); }

    double multiplier(std::array<int, 2> n, int dim) const {
        const double y1 = two_pi * n[0] * (two_pi * n[0]);
        if (dim == 1) return geometric_sum(y1, k);
        const double y2 = two_pi * n[1] * (two_pi * n[1]);
        double total = 0.0;
        double p1 = 1.0;
        for (int j1 = 0; j1 <= k; ++j1) {
            total += p1 * geometric_sum(y2, k - j1);
            p1 *= y1;
        }
        return total;
    }

private:
    // 1 + y + ... + y^kk, Horner form; exact at y = 0.
    static double geometric_sum(double y, int kk) {
        double s = 1.0;
        for (int j = 0; j < kk; ++j) s = 1.0 + y * s;
        return s;
    }
};

/// H^k norm of a field over the resolved band |n_i| < M/2.
inline double h_norm(const ScalarField& f, const SobolevIndex& k) {
    const TorusGrid& g = f.grid();
    const Spectrum& c = f.spectrum();
    double total = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!g.in_band(i)) continue;
        total += k.multiplier(g.frequencies(i), g.dim()) * std::norm(c[i]);
    }
    return std::sqrt(total);
}

/// H^-k dual norm of a signed grid function (typically a difference of
/// densities), over the resolved band.
inline double h_dual_norm(const ScalarField& q, const SobolevIndex& k) {
    const TorusGrid& g = q.grid();
    const Spectrum& c = q.spectrum();
    double total = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!g.in_band(i)) continue;
        total += std::norm(c[i]) / k.multiplier(g.frequencies(i), g.dim());
    }
    return std::sqrt(total);
}

/// sum over |n|_inf >= M/2 of 1/m_k(n): the multiplier mass outside the
/// resolved band, used for truncation tail bounds on atomic dual norms.
inline double band_tail_multiplier_sum(const TorusGrid& grid, const SobolevIndex& k) {
    const int half = grid.nodes_per_axis() / 2;
    const int kk = k.k;
    if (kk == 0) throw std::invalid_argument("band_tail_multiplier_sum: order 0 has no decay");
    const int cap = 8192;
    double total = 0.0;
    if (grid.dim() == 1) {
        for (int n = half; n <= cap; ++n) total += 2.0 / k.multiplier({n, 0}, 1);
        // 1/m_k(n) <= (2 pi n)^(-2k); integral remainder past the cap
        total += 2.0 * std::pow(two_pi, -2.0 * kk) * std::pow(static_cast<double>(cap), 1.0 - 2.0 * kk) /
                 (2.0 * kk - 1.0);
        return total;
    }
    // d = 2: shell |n|_inf = j has 8j lattice points and m_k(n) >= (2 pi j)^(2k).
    for (int j = half; j <= cap; ++j)
        total += 8.0 * j * std::pow(two_pi * j, -2.0 * kk);
    total += 8.0 * std::pow(two_pi, -2.0 * kk) * std::pow(static_cast<double>(cap), 2.0 - 2.0 * kk) /
             (2.0 * kk - 2.0);
    return total;
}

}  // namespace skmfc
