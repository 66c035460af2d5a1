#pragma once

#include <cmath>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/field.hpp"
#include "skmfc/sobolev.hpp"

namespace skmfc {

/// Weighted atomic probability measure on the torus: sum_i w_i delta_{x_i},
/// w_i > 0, sum w_i = 1 (validated to 1e-12).
class AtomicMeasure {
public:
    AtomicMeasure(int dim, std::vector<std::array<double, 2>> positions, std::vector<double> weights)
        : d_(dim), x_(std::move(positions)), w_(std::move(weights)) {
        if (d_ != 1 && d_ != 2) throw ConfigError("AtomicMeasure: dim must be 1 or 2");
        if (x_.size() != w_.size() || x_.empty())
            throw ConfigError("AtomicMeasure: positions/weights mismatch or empty");
        double total = 0.0;
        for (double w : w_) {
            if (!(w > 0.0)) throw ConfigError("AtomicMeasure: weights must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw ConfigError("AtomicMeasure: weights must sum to 1");
        for (auto& p : x_) {
            p[0] = wrap_unit(p[0]);
            p[1] = d_ == 2 ? wrap_unit(p[1]) : 0.0;
        }
    }

    static AtomicMeasure normalized(int dim, std::vector<std::array<double, 2>> positions,
                                    std::vector<double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw ConfigError("AtomicMeasure: nonpositive total weight");
        for (double& w : weights) w /= total;
        return AtomicMeasure(dim, std::move(positions), std::move(weights));
    }

    int dim() const { return d_; }
    std::size_t size() const { return x_.size(); }
    const std::vector<std::array<double, 2>>& positions() const { return x_; }
    const std::vector<double>& weights() const { return w_; }

private:
    int d_;
    std::vector<std::array<double, 2>> x_;
    std::vector<double> w_;
};

/// Closed-form Fourier coefficients of an atomic measure on the resolved band:
/// q_hat_n = sum_i w_i exp(-2 pi i n.x_i); bins outside the band are zero.
inline Spectrum atom_spectrum(const TorusGrid& grid, const AtomicMeasure& mu) {
    if (grid.dim() != mu.dim()) throw ConfigError("atom_spectrum: dimension mismatch");
    const int m = grid.nodes_per_axis();
    const int half = m / 2;
    Spectrum c(grid.size(), 0.0);
    if (grid.dim() == 1) {
        // accumulate positive frequencies by power iteration, mirror to negative
        std::vector<std::complex<double>> acc(half, 0.0);
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const double x = mu.positions()[i][0];
            const double w = mu.weights()[i];
            const std::complex<double> e(std::cos(-two_pi * x), std::sin(-two_pi * x));
            std::complex<double> p = 1.0;
            for (int n = 0; n < half; ++n) {
                acc[n] += w * p;
                p *= e;
            }
        }
        for (int n = 0; n < half; ++n) {
            c[n] = acc[n];
            if (n > 0) c[m - n] = std::conj(acc[n]);
        }
        return c;
    }
    std::vector<std::complex<double>> p1(m), p2(m);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto& x = mu.positions()[i];
        const double w = mu.weights()[i];
        const std::complex<double> e1(std::cos(-two_pi * x[0]), std::sin(-two_pi * x[0]));
        const std::complex<double> e2(std::cos(-two_pi * x[1]), std::sin(-two_pi * x[1]));
        p1[0] = p2[0] = 1.0;
        for (int n = 1; n < half; ++n) {
            p1[n] = p1[n - 1] * e1;
            p2[n] = p2[n - 1] * e2;
        }
        for (int k1 = 0; k1 < m; ++k1) {
            int n1 = grid.frequency(k1);
            if (2 * std::abs(n1) >= m) continue;
            std::complex<double> f1 = n1 >= 0 ? p1[n1] : std::conj(p1[-n1]);
            for (int k2 = 0; k2 < m; ++k2) {
                int n2 = grid.frequency(k2);
                if (2 * std::abs(n2) >= m) continue;
                std::complex<double> f2 = n2 >= 0 ? p2[n2] : std::conj(p2[-n2]);
                c[static_cast<std::size_t>(k1) * m + k2] += w * f1 * f2;
            }
        }
    }
    return c;
}

/// Truncated-band H^-k distance together with the truncation tail bound
/// (a bound on what the discarded frequencies could contribute).
struct DualDistance {
    double value = 0.0;
    double tail_bound = 0.0;
};

namespace detail {

inline DualDistance dual_distance_from_spectrum(const TorusGrid& grid, const Spectrum& q,
                                                double total_variation, const SobolevIndex& k) {
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!grid.in_band(i)) continue;
        total += std::norm(q[i]) / k.multiplier(grid.frequencies(i), grid.dim());
    }
    DualDistance out;
    out.value = std::sqrt(total);
    out.tail_bound = total_variation * std::sqrt(band_tail_multiplier_sum(grid, k));
    return out;
}

}  // namespace detail

/// H^-k distance between two atomic measures (signed difference has total
/// mass zero), evaluated by the closed-form Fourier sum on the band.
inline DualDistance h_dual_distance(const TorusGrid& grid, const AtomicMeasure& a,
                                    const AtomicMeasure& b, const SobolevIndex& k) {
    Spectrum qa = atom_spectrum(grid, a);
    Spectrum qb = atom_spectrum(grid, b);
    for (std::size_t i = 0; i < qa.size(); ++i) qa[i] -= qb[i];
    return detail::dual_distance_from_spectrum(grid, qa, 2.0, k);
}

/// H^-k distance between an atomic measure and a probability density field.
inline DualDistance h_dual_distance(const AtomicMeasure& a, const ScalarField& density,
                                    const SobolevIndex& k) {
    const TorusGrid& grid = density.grid();
    Spectrum q = atom_spectrum(grid, a);
    const Spectrum& rho = density.spectrum();
    for (std::size_t i = 0; i < q.size(); ++i)
        if (grid.in_band(i)) q[i] -= rho[i];
    return detail::dual_distance_from_spectrum(grid, q, 2.0, k);
}

/// Default mollification bandwidth: the heat time after which the band-limited
/// kernel is positive on the grid with a wide margin.
inline double default_mollify_eps(const TorusGrid& grid) {
    const double h = grid.spacing();
    return 4.0 * h * h;
}

struct MollifiedMeasure {
    ScalarField density;
    double h_dual_error = 0.0;   // H^-k distance between the atoms and the density
    double tail_bound = 0.0;
    double clipped_mass = 0.0;   // negative mass removed before renormalization
};

/// Gaussian mollification of an atomic measure: heat-propagate the band-limited
/// atom spectrum for time eps, clip the (tiny) negative part, renormalize.
/// Rejects bandwidths the grid cannot resolve (negative part above 1e-3).
inline MollifiedMeasure mollify_atoms(const TorusGrid& grid, const AtomicMeasure& mu, double eps,
                                      const SobolevIndex& k) {
    if (!(eps > 0.0)) throw ConfigError("mollify_atoms: eps must be positive");
    Spectrum c = atom_spectrum(grid, mu);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto n = grid.frequencies(i);
        double n2 = static_cast<double>(n[0]) * n[0] + static_cast<double>(n[1]) * n[1];
        c[i] *= std::exp(-0.5 * eps * two_pi * two_pi * n2);
    }
    std::vector<double> v = dft_inverse(grid, c);
    double neg_mass = 0.0, mass = 0.0;
    const double vol = grid.cell_volume();
    for (double x : v) {
        if (x < 0.0) neg_mass -= x * vol;
        mass += x * vol;
    }
    if (neg_mass > 1e-3)
        throw SolverError("mollify_atoms: bandwidth below grid resolution (negative mass " +
                          std::to_string(neg_mass) + ")");
    double clipped_total = 0.0;
    for (double& x : v) {
        if (x < 0.0) x = 0.0;
    }
    double new_mass = 0.0;
    for (double x : v) new_mass += x * vol;
    clipped_total = neg_mass;
    if (!(new_mass > 0.0)) throw SolverError("mollify_atoms: degenerate density");
    for (double& x : v) x /= new_mass;
    ScalarField density(grid, std::move(v));
    auto dist = h_dual_distance(mu, density, k);
    return MollifiedMeasure{std::move(density), dist.value, dist.tail_bound, clipped_total};
}

inline MollifiedMeasure mollify_atoms(const TorusGrid& grid, const AtomicMeasure& mu) {
    return mollify_atoms(grid, mu, default_mollify_eps(grid), SobolevIndex::default_for_dim(grid.dim()));
}

}  // namespace skmfc
