#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "skmfc/fp.hpp"
#include "skmfc/hjb.hpp"
#include "skmfc/sobolev.hpp"

namespace skmfc {

struct PicardOptions {
    double tol = 1e-7;        // on sup_t |du|_inf + sup_t H^-k(dmu)
    int max_iter = 500;
    double damping = 0.5;     // fixed-weight damping on the measure update
    int sobolev_order = 0;    // 0 selects the dimension default
};

struct MFCSolution {
    MeasurePath mu;
    AdjointPath u;
    ControlPath alpha;
    double value = 0.0;
    double radius = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    bool fallback_engaged = false;                // fictitious-play weights were needed
    std::vector<double> residual_history;
};

/// Running-plus-terminal cost of a (measure, control) pair:
///   int_t0^T int 1/2 |alpha_t|^2 dmu_t dt + int g dmu_T,
/// trapezoidal in time, exact grid quadrature in space.
inline double cost_functional(const ProblemSpec& prob, const MeasurePath& mu, const ControlPath& alpha) {
    const TorusGrid& g = prob.grid;
    const int d = g.dim();
    TimeMesh mesh = mu.mesh;
    auto running = [&](int j) {
        double s = 0.0;
        const auto& mv = mu.at(j).values();
        for (int axis = 0; axis < d; ++axis) {
            const auto& av = alpha.at(j, axis).values();
            for (std::size_t i = 0; i < mv.size(); ++i) s += av[i] * av[i] * mv[i];
        }
        return 0.5 * s * g.cell_volume();
    };
    double total = 0.0;
    for (int j = 0; j < mesh.steps; ++j) total += 0.5 * mesh.dt * (running(j) + running(j + 1));
    return total + pair_with_density(prob.terminal, mu.at(mesh.steps));
}

namespace detail {

inline MeasurePath blend_measure_paths(const MeasurePath& a, const MeasurePath& b, double theta) {
    MeasurePath out;
    out.mesh = a.mesh;
    out.max_renorm_drift = std::max(a.max_renorm_drift, b.max_renorm_drift);
    out.min_value = std::numeric_limits<double>::infinity();
    out.density.reserve(a.density.size());
    for (std::size_t j = 0; j < a.density.size(); ++j) {
        out.density.push_back((1.0 - theta) * a.density[j] + theta * b.density[j]);
        out.min_value = std::min(out.min_value, out.density.back().min());
    }
    return out;
}

inline double path_dual_distance(const MeasurePath& a, const MeasurePath& b, const SobolevIndex& k) {
    double sup = 0.0;
    for (std::size_t j = 0; j < a.density.size(); ++j)
        sup = std::max(sup, h_dual_norm(a.density[j] - b.density[j], k));
    return sup;
}

inline double path_sup_distance(const AdjointPath& a, const AdjointPath& b) {
    double sup = 0.0;
    for (std::size_t j = 0; j < a.u.size(); ++j)
        sup = std::max(sup, (a.u[j] - b.u[j]).sup_norm());
    return sup;
}

}  // namespace detail

/// Fixed-point iteration on the coupled forward/backward system. Each round
/// solves the backward equation along the current measure path, extracts the
/// clipped feedback, replays the forward flow, and blends the new measure path
/// in with weight `damping`. If the residual stops decreasing after round 3
/// the blend switches to fictitious-play weights 1/(m+1). Hitting max_iter
/// returns the best iterate flagged non-converged rather than throwing.
/// The returned triple is made consistent by one final undamped sweep, and
/// `value` is the cost functional of exactly that pair.
inline MFCSolution solve_mean_field(const ProblemSpec& prob, const ScalarField& mu0,
                                    const PicardOptions& opt = {}) {
    prob.validate();
    const SobolevIndex k = opt.sobolev_order > 0 ? SobolevIndex(opt.sobolev_order)
                                                 : SobolevIndex::default_for_dim(prob.grid.dim());
    const double radius = prob.effective_radius();

    MFCSolution sol;
    sol.radius = radius;
    MeasurePath mu = solve_fokker_planck(prob, zero_control(prob.grid, prob.mesh()), mu0);
    AdjointPath u_prev;
    bool have_u_prev = false;
    bool fictitious = false;
    int fp_round = 1;

    for (int m = 1; m <= opt.max_iter; ++m) {
        AdjointPath u = solve_hjb_backward(prob, mu, radius);
        ControlPath alpha = control_from_adjoint(u, radius);
        MeasurePath mu_new = solve_fokker_planck(prob, alpha, mu0);

        double theta = fictitious ? 1.0 / (++fp_round) : opt.damping;
        MeasurePath mu_next = detail::blend_measure_paths(mu, mu_new, theta);

        double res = detail::path_dual_distance(mu_next, mu, k);
        if (have_u_prev) res += detail::path_sup_distance(u, u_prev);
        sol.residual_history.push_back(res);
        sol.iterations = m;
        sol.residual = res;

        if (have_u_prev && res <= opt.tol) {
            sol.converged = true;
            mu = std::move(mu_next);
            break;
        }
        std::size_t h = sol.residual_history.size();
        if (!fictitious && h >= 2 && m > 3 && sol.residual_history[h - 1] > sol.residual_history[h - 2]) {
            fictitious = true;
            sol.fallback_engaged = true;
        }
        mu = std::move(mu_next);
        u_prev = std::move(u);
        have_u_prev = true;
    }

    // consistency sweep: return a pair that actually solves the two equations
    sol.u = solve_hjb_backward(prob, mu, radius);
    sol.alpha = control_from_adjoint(sol.u, radius);
    sol.mu = solve_fokker_planck(prob, sol.alpha, mu0);
    sol.value = cost_functional(prob, sol.mu, sol.alpha);
    return sol;
}

struct DualityDefect {
    double value = 0.0;        // cost-side value
    double dual_value = 0.0;   // <u_t0;mu_0> - int <V;mu_t><u_t;mu_t> dt
    double absolute = 0.0;
    double relative = 0.0;
};

/// Along an optimal pair the value has the dual representation
///   value = <u_t0; mu_t0> - int_t0^T <V;mu_t> <u_t;mu_t> dt.
inline DualityDefect duality_defect(const ProblemSpec& prob, const MFCSolution& sol) {
    const TorusGrid& g = prob.grid;
    TimeMesh mesh = sol.mu.mesh;
    auto term = [&](int j) {
        double kv = detail::quadrature(g, prob.potential.values(), sol.mu.at(j).values());
        double uv = detail::quadrature(g, sol.u.at(j).values(), sol.mu.at(j).values());
        return kv * uv;
    };
    double integral = 0.0;
    for (int j = 0; j < mesh.steps; ++j) integral += 0.5 * mesh.dt * (term(j) + term(j + 1));
    DualityDefect out;
    out.value = sol.value;
    out.dual_value = pair_with_density(sol.u.at(0), sol.mu.at(0)) - integral;
    out.absolute = std::abs(out.value - out.dual_value);
    out.relative = out.absolute / std::max(1e-12, std::abs(out.value));
    return out;
}

struct DppDefect {
    double value_full = 0.0;
    double running_cost = 0.0;     // cost accrued on [t0, t1]
    double value_restarted = 0.0;  // value of the problem restarted at t1
    double absolute = 0.0;
    double relative = 0.0;
};

/// Dynamic-programming consistency: solve on [t0,T], restart from the flow's
/// own measure at a mesh node t1, and compare value(t0) against
/// running cost on [t0,t1] + value(t1). t1 = T reduces the restart to the
/// terminal pairing.
inline DppDefect dpp_defect(const ProblemSpec& prob, const ScalarField& mu0, double t1,
                            const PicardOptions& opt = {}) {
    MFCSolution full = solve_mean_field(prob, mu0, opt);
    TimeMesh mesh = full.mu.mesh;
    auto j1_opt = mesh.node_index(t1);
    if (!j1_opt) throw ConfigError("dpp_defect: t1 must be a mesh node");
    const int j1 = *j1_opt;

    const TorusGrid& g = prob.grid;
    const int d = g.dim();
    auto running = [&](int j) {
        double s = 0.0;
        const auto& mv = full.mu.at(j).values();
        for (int axis = 0; axis < d; ++axis) {
            const auto& av = full.alpha.at(j, axis).values();
            for (std::size_t i = 0; i < mv.size(); ++i) s += av[i] * av[i] * mv[i];
        }
        return 0.5 * s * g.cell_volume();
    };
    DppDefect out;
    out.value_full = full.value;
    for (int j = 0; j < j1; ++j) out.running_cost += 0.5 * mesh.dt * (running(j) + running(j + 1));

    if (j1 == mesh.steps) {
        out.value_restarted = pair_with_density(prob.terminal, full.mu.at(j1));
    } else if (j1 == 0) {
        out.value_restarted = full.value;
    } else {
        ProblemSpec tail = prob;
        tail.t0 = mesh.time(j1);
        tail.dt = mesh.dt;
        out.value_restarted = solve_mean_field(tail, full.mu.at(j1), opt).value;
    }
    out.absolute = std::abs(out.value_full - (out.running_cost + out.value_restarted));
    out.relative = out.absolute / std::max(1e-12, std::abs(out.value_full));
    return out;
}

}  // namespace skmfc
