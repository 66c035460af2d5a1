#pragma once

#include <cmath>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/problem.hpp"

namespace skmfc {

namespace detail {

/// Per-run spectral tables: heat damping for one step and derivative
/// multipliers with the Nyquist bin zeroed.
struct SpectralWorkspace {
    TorusGrid grid;
    std::vector<double> damp_full;   // exp(-dt/2 (2 pi)^2 |n|^2)
    std::array<std::vector<double>, 2> dmult;   // 2 pi n_axis, 0 outside band

    SpectralWorkspace(const TorusGrid& g, double dt) : grid(g) {
        const std::size_t n = g.size();
        damp_full.resize(n);
        for (int axis = 0; axis < g.dim(); ++axis) dmult[axis].assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto f = g.frequencies(i);
            double n2 = static_cast<double>(f[0]) * f[0] + static_cast<double>(f[1]) * f[1];
            damp_full[i] = std::exp(-0.5 * dt * two_pi * two_pi * n2);
            if (g.in_band(i))
                for (int axis = 0; axis < g.dim(); ++axis) dmult[axis][i] = two_pi * f[axis];
        }
    }

    void damp(Spectrum& c) const {
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= damp_full[i];
    }

    void add_derivative(const Spectrum& c, int axis, Spectrum& out) const {
        for (std::size_t i = 0; i < c.size(); ++i)
            out[i] += c[i] * std::complex<double>(0.0, dmult[axis][i]);
    }

    std::vector<double> derivative_values(const Spectrum& c, int axis) const {
        Spectrum d(c.size(), 0.0);
        add_derivative(c, axis, d);
        return dft_inverse(grid, d);
    }
};

inline double quadrature(const TorusGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * g.cell_volume();
}

}  // namespace detail

inline ControlPath zero_control(const TorusGrid& grid, const TimeMesh& mesh) {
    ControlPath out;
    out.mesh = mesh;
    ScalarField z = ScalarField::constant(grid, 0.0);
    for (int j = 0; j <= mesh.steps; ++j) {
        std::vector<ScalarField> comp(grid.dim(), z);
        out.comp.push_back(std::move(comp));
    }
    return out;
}

/// Forward flow of the controlled soft-killing continuity equation
///     d mu/dt = 1/2 Laplacian(mu) - div(alpha mu) - (V - <V;mu>) mu
/// on the problem's time mesh. Diffusion is integrated exactly in Fourier
/// space each step; transport and killing enter through a Heun (two stage)
/// explicit update, so the stepper is second order in dt. The nonlocal
/// killing term conserves mass analytically; each step renormalizes and
/// records the pre-renormalization drift, which sits at rounding level.
/// Aborts when a density node drops below -1e-6 (under-resolution).
inline MeasurePath solve_fokker_planck(const ProblemSpec& prob, const ControlPath& alpha,
                                       const ScalarField& mu0) {
    prob.validate();
    const TorusGrid& g = prob.grid;
    require_same_grid(g, mu0.grid(), "solve_fokker_planck");
    TimeMesh mesh = prob.mesh();
    if (alpha.mesh.steps != mesh.steps || std::abs(alpha.mesh.t0 - mesh.t0) > 1e-12)
        throw ConfigError("solve_fokker_planck: control path mesh mismatch");
    if (mu0.min() < -1e-10) throw ConfigError("solve_fokker_planck: initial density has negative nodes");
    if (std::abs(mu0.integral() - 1.0) > 1e-8)
        throw ConfigError("solve_fokker_planck: initial density must integrate to 1");

    detail::SpectralWorkspace ws(g, mesh.dt);
    const auto& Vv = prob.potential.values();
    const double vol = g.cell_volume();
    const int d = g.dim();

    MeasurePath path;
    path.mesh = mesh;
    path.density.reserve(mesh.nodes());
    {   // exact initial renormalization
        Spectrum c = mu0.spectrum();
        double mass = c[0].real();
        for (auto& z : c) z /= mass;
        c[0] = 1.0;
        path.density.push_back(from_spectrum(g, std::move(c)));
    }
    path.min_value = path.density[0].min();

    // N(t, mu) as a spectrum: -i 2 pi n . F[alpha mu] - F[(V - <V;mu>) mu]
    auto rhs_spectrum = [&](int j, const std::vector<double>& mu_v) {
        std::vector<double> prod(mu_v.size());
        Spectrum total(mu_v.size(), 0.0);
        for (int axis = 0; axis < d; ++axis) {
            const auto& av = alpha.at(j, axis).values();
            for (std::size_t i = 0; i < mu_v.size(); ++i) prod[i] = av[i] * mu_v[i];
            Spectrum pc = dft_forward(g, prod);
            for (std::size_t i = 0; i < total.size(); ++i)
                total[i] -= pc[i] * std::complex<double>(0.0, ws.dmult[axis][i]);
        }
        double mean_v = 0.0;
        for (std::size_t i = 0; i < mu_v.size(); ++i) mean_v += Vv[i] * mu_v[i];
        mean_v *= vol;
        for (std::size_t i = 0; i < mu_v.size(); ++i) prod[i] = (Vv[i] - mean_v) * mu_v[i];
        Spectrum rc = dft_forward(g, prod);
        for (std::size_t i = 0; i < total.size(); ++i) total[i] -= rc[i];
        return total;
    };

    const double dt = mesh.dt;
    for (int j = 0; j < mesh.steps; ++j) {
        const ScalarField& mu = path.density[j];
        Spectrum k1 = rhs_spectrum(j, mu.values());
        Spectrum stage(mu.spectrum());
        for (std::size_t i = 0; i < stage.size(); ++i) stage[i] += dt * k1[i];
        ws.damp(stage);
        std::vector<double> stage_v = dft_inverse(g, stage);
        Spectrum k2 = rhs_spectrum(j + 1, stage_v);

        Spectrum next(mu.spectrum());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += 0.5 * dt * k1[i];
        ws.damp(next);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += 0.5 * dt * k2[i];

        double drift = std::abs(next[0].real() - 1.0);
        path.max_renorm_drift = std::max(path.max_renorm_drift, drift);
        double mass = next[0].real();
        if (!(mass > 0.0)) throw SolverError("solve_fokker_planck: mass collapsed");
        for (auto& z : next) z /= mass;
        next[0] = 1.0;

        ScalarField f = from_spectrum(g, std::move(next));
        double mn = f.min();
        path.min_value = std::min(path.min_value, mn);
        if (mn < -1e-6)
            throw SolverError("solve_fokker_planck: density negativity " + std::to_string(mn) +
                              " at t=" + std::to_string(mesh.time(j + 1)) + "; refine the grid or step");
        path.density.push_back(std::move(f));
    }
    return path;
}

}  // namespace skmfc
