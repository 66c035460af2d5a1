#pragma once

#include <cmath>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/fp.hpp"
#include "skmfc/hamiltonian.hpp"
#include "skmfc/problem.hpp"

namespace skmfc {

/// Backward value equation along a fixed measure path:
///     -du/dt - 1/2 Laplacian(u) + H^R(grad u) + (V - <V;mu_t>) u - V <u_t;mu_t> = 0,
///     u(T) = g,
/// marched with the same exact-diffusion Heun stepper as the forward flow.
/// Records the gradient radius actually visited and the worst excess over the
/// a-priori sup bound exp(int_t^T <V;mu_s> ds) |g|_inf; aborts if the sup norm
/// passes 10x that bound.
inline AdjointPath solve_hjb_backward(const ProblemSpec& prob, const MeasurePath& mu,
                                      double radius_override = 0.0) {
    prob.validate();
    const TorusGrid& g = prob.grid;
    TimeMesh mesh = prob.mesh();
    if (mu.mesh.steps != mesh.steps || std::abs(mu.mesh.t0 - mesh.t0) > 1e-12)
        throw ConfigError("solve_hjb_backward: measure path mesh mismatch");
    const double radius = radius_override > 0.0 ? radius_override : prob.effective_radius();

    detail::SpectralWorkspace ws(g, mesh.dt);
    const auto& Vv = prob.potential.values();
    const double vol = g.cell_volume();
    const int d = g.dim();
    const double g_inf = prob.terminal.sup_norm();

    std::vector<double> kill_mean(mesh.nodes());
    for (int j = 0; j <= mesh.steps; ++j)
        kill_mean[j] = detail::quadrature(g, Vv, mu.at(j).values());

    AdjointPath path;
    path.mesh = mesh;
    path.u.assign(mesh.nodes(), prob.terminal);

    double sup_grad = 0.0;
    // N(t_j, u) nodewise; also folds the running gradient sup.
    auto rhs_values = [&](int j, const std::vector<double>& uv, const Spectrum& uc) {
        std::vector<double> grad2(uv.size(), 0.0);
        for (int axis = 0; axis < d; ++axis) {
            std::vector<double> dv = ws.derivative_values(uc, axis);
            for (std::size_t i = 0; i < uv.size(); ++i) grad2[i] += dv[i] * dv[i];
        }
        double mean_u = detail::quadrature(g, uv, mu.at(j).values());
        std::vector<double> out(uv.size());
        for (std::size_t i = 0; i < uv.size(); ++i) {
            sup_grad = std::max(sup_grad, grad2[i]);
            out[i] = -hr_value(grad2[i], radius) - (Vv[i] - kill_mean[j]) * uv[i] + Vv[i] * mean_u;
        }
        return out;
    };

    const double dt = mesh.dt;
    double kill_integral = 0.0;   // int_t^T <V;mu_s> ds, trapezoid, accumulated backward
    path.apriori_margin = path.u[mesh.steps].sup_norm() - g_inf;
    for (int j = mesh.steps - 1; j >= 0; --j) {
        const ScalarField& u1 = path.u[j + 1];
        std::vector<double> k1 = rhs_values(j + 1, u1.values(), u1.spectrum());
        Spectrum k1c = dft_forward(g, k1);

        Spectrum stage(u1.spectrum());
        for (std::size_t i = 0; i < stage.size(); ++i) stage[i] += dt * k1c[i];
        ws.damp(stage);
        std::vector<double> stage_v = dft_inverse(g, stage);
        std::vector<double> k2 = rhs_values(j, stage_v, stage);
        Spectrum k2c = dft_forward(g, k2);

        Spectrum next(u1.spectrum());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += 0.5 * dt * k1c[i];
        ws.damp(next);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += 0.5 * dt * k2c[i];

        path.u[j] = from_spectrum(g, std::move(next));

        kill_integral += 0.5 * dt * (kill_mean[j] + kill_mean[j + 1]);
        const double bound = std::exp(kill_integral) * g_inf;
        const double sup = path.u[j].sup_norm();
        path.apriori_margin = std::max(path.apriori_margin, sup - bound);
        if (sup > 10.0 * bound + 1e-6)
            throw SolverError("solve_hjb_backward: sup norm " + std::to_string(sup) +
                              " exceeds 10x the a-priori bound at t=" + std::to_string(mesh.time(j)));
    }
    // fold in the gradient of the earliest slice (the loop saw nodes 1..steps)
    {
        const ScalarField& u0 = path.u[0];
        for (int axis = 0; axis < d; ++axis) {
            std::vector<double> dv = ws.derivative_values(u0.spectrum(), axis);
            for (double x : dv) sup_grad = std::max(sup_grad, x * x);
        }
    }
    path.sup_gradient = std::sqrt(sup_grad);
    return path;
}

/// sup-norm distance between backward solves at radius R and 2R; zero (to
/// rounding) whenever the gradient stays inside the truncation ball.
inline double radius_doubling_gap(const ProblemSpec& prob, const MeasurePath& mu, double radius) {
    AdjointPath a = solve_hjb_backward(prob, mu, radius);
    AdjointPath b = solve_hjb_backward(prob, mu, 2.0 * radius);
    double gap = 0.0;
    for (int j = 0; j <= prob.mesh().steps; ++j)
        gap = std::max(gap, (a.at(j) - b.at(j)).sup_norm());
    return gap;
}

/// Feedback control alpha = -H^R_p(grad u) on every mesh node.
inline ControlPath control_from_adjoint(const AdjointPath& u_path, double radius) {
    const TorusGrid& g = u_path.u.at(0).grid();
    const int d = g.dim();
    detail::SpectralWorkspace ws(g, u_path.mesh.dt);
    ControlPath out;
    out.mesh = u_path.mesh;
    out.comp.reserve(u_path.u.size());
    for (const ScalarField& u : u_path.u) {
        std::array<std::vector<double>, 2> dv;
        for (int axis = 0; axis < d; ++axis) dv[axis] = ws.derivative_values(u.spectrum(), axis);
        std::vector<ScalarField> comp;
        for (int axis = 0; axis < d; ++axis) {
            std::vector<double> a(dv[axis].size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                double p2 = dv[0][i] * dv[0][i] + (d == 2 ? dv[1][i] * dv[1][i] : 0.0);
                a[i] = -hr_clip_factor(p2, radius) * dv[axis][i];
            }
            comp.emplace_back(g, std::move(a));
        }
        out.comp.push_back(std::move(comp));
    }
    return out;
}

struct LinearBackwardPath {
    TimeMesh mesh;                    // covers [t0, t1]
    std::vector<ScalarField> phi;
    double sup_norm = 0.0;            // sup over time of |phi_t|_inf
};

/// Linearized backward equation along a frozen pair (mu, alpha):
///     -dphi/dt - 1/2 Laplacian(phi) - alpha.grad phi + (V - <V;mu_t>) phi - V <phi_t;mu_t> = 0
/// on [t0, t1], phi(t1) given. t1 must lie on the problem mesh.
inline LinearBackwardPath solve_linear_backward(const ProblemSpec& prob, const MeasurePath& mu,
                                                const ControlPath& alpha, const ScalarField& phi_t1,
                                                double t1) {
    prob.validate();
    const TorusGrid& g = prob.grid;
    require_same_grid(g, phi_t1.grid(), "solve_linear_backward");
    TimeMesh mesh = prob.mesh();
    if (mu.mesh.steps != mesh.steps || alpha.mesh.steps != mesh.steps)
        throw ConfigError("solve_linear_backward: path mesh mismatch");
    auto j1_opt = mesh.node_index(t1);
    if (!j1_opt || *j1_opt == 0) throw ConfigError("solve_linear_backward: t1 must be a mesh node past t0");
    const int j1 = *j1_opt;

    detail::SpectralWorkspace ws(g, mesh.dt);
    const auto& Vv = prob.potential.values();
    const int d = g.dim();

    std::vector<double> kill_mean(mesh.nodes());
    for (int j = 0; j <= mesh.steps; ++j)
        kill_mean[j] = detail::quadrature(g, Vv, mu.at(j).values());

    auto rhs_values = [&](int j, const std::vector<double>& pv, const Spectrum& pc) {
        std::vector<double> out(pv.size(), 0.0);
        for (int axis = 0; axis < d; ++axis) {
            std::vector<double> dv = ws.derivative_values(pc, axis);
            const auto& av = alpha.at(j, axis).values();
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += av[i] * dv[i];
        }
        double mean_phi = detail::quadrature(g, pv, mu.at(j).values());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += -(Vv[i] - kill_mean[j]) * pv[i] + Vv[i] * mean_phi;
        return out;
    };

    LinearBackwardPath path;
    path.mesh = TimeMesh{mesh.t0, mesh.dt, j1};
    path.phi.assign(j1 + 1, phi_t1);
    path.sup_norm = phi_t1.sup_norm();
    const double dt = mesh.dt;
    for (int j = j1 - 1; j >= 0; --j) {
        const ScalarField& p1 = path.phi[j + 1];
        std::vector<double> k1 = rhs_values(j + 1, p1.values(), p1.spectrum());
        Spectrum k1c = dft_forward(g, k1);
        Spectrum stage(p1.spectrum());
        for (std::size_t i = 0; i < stage.size(); ++i) stage[i] += dt * k1c[i];
        ws.damp(stage);
        std::vector<double> stage_v = dft_inverse(g, stage);
        std::vector<double> k2 = rhs_values(j, stage_v, stage);
        Spectrum k2c = dft_forward(g, k2);
        Spectrum next(p1.spectrum());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += 0.5 * dt * k1c[i];
        ws.damp(next);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += 0.5 * dt * k2c[i];
        path.phi[j] = from_spectrum(g, std::move(next));
        path.sup_norm = std::max(path.sup_norm, path.phi[j].sup_norm());
    }
    return path;
}

}  // namespace skmfc
