#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "skmfc/cole_hopf.hpp"
#include "skmfc/errors.hpp"
#include "skmfc/field.hpp"
#include "skmfc/fp.hpp"
#include "skmfc/measure.hpp"
#include "skmfc/particles.hpp"
#include "skmfc/picard.hpp"
#include "skmfc/problem.hpp"
#include "skmfc/rng.hpp"

namespace skmfc {

/// Two-particle state after the clock reduction. The pair value function
/// depends on the clocks (a1, a2) only through delta = a1 - a2: the weights
/// n1 = 1 + e^{delta}, n2 = 1 + e^{-delta}, the terminal cost and the clock
/// dynamics are all invariant under a common clock shift.
struct ReducedState2 {
    double x1 = 0.0;
    double x2 = 0.0;
    double delta = 0.0;
};

/// Pair value function v(t, x1, x2, delta) on [0,1)^2 x [-delta_max, delta_max],
/// stored at a chosen set of time-mesh nodes. Slice layout is delta-major:
/// value[j*M*M + i1*M + i2] for delta node j.
class ValueTable2 {
public:
    ValueTable2(TorusGrid slice_grid, int delta_nodes, double delta_max, TimeMesh mesh)
        : slice_grid_(slice_grid), mesh_(mesh), delta_nodes_(delta_nodes), delta_max_(delta_max) {
        if (slice_grid_.dim() != 2) throw ConfigError("ValueTable2 needs a 2-d slice grid");
        if (delta_nodes_ < 3 || delta_nodes_ % 2 == 0)
            throw ConfigError("ValueTable2: delta_nodes must be odd and >= 3 so delta = 0 is a node");
        if (!(delta_max_ > 0.0)) throw ConfigError("ValueTable2: delta_max must be positive");
        n1_.resize(delta_nodes_);
        n2_.resize(delta_nodes_);
        for (int j = 0; j < delta_nodes_; ++j) {
            const double d = delta(j);
            n1_[j] = 1.0 + std::exp(d);
            n2_[j] = 1.0 + std::exp(-d);
        }
    }

    int x_nodes() const { return slice_grid_.nodes_per_axis(); }
    int delta_nodes() const { return delta_nodes_; }
    double delta_max() const { return delta_max_; }
    double delta_spacing() const { return 2.0 * delta_max_ / (delta_nodes_ - 1); }
    double delta(int j) const { return -delta_max_ + j * delta_spacing(); }
    const TorusGrid& slice_grid() const { return slice_grid_; }
    const TimeMesh& mesh() const { return mesh_; }
    const std::vector<double>& weight_n1() const { return n1_; }
    const std::vector<double>& weight_n2() const { return n2_; }

    std::size_t slice_size() const {
        return static_cast<std::size_t>(delta_nodes_) * slice_grid_.size();
    }

    void store(double t, std::vector<double> values) {
        if (values.size() != slice_size()) throw ConfigError("ValueTable2: slice size mismatch");
        times_.push_back(t);
        slices_.push_back(std::move(values));
    }

    const std::vector<double>& times() const { return times_; }

    const std::vector<double>& slice_at(double t) const {
        for (std::size_t i = 0; i < times_.size(); ++i)
            if (std::abs(times_[i] - t) <= 1e-9) return slices_[i];
        throw ConfigError("ValueTable2: no stored slice at requested time");
    }

    double sup_norm() const {
        double s = 0.0;
        for (const auto& sl : slices_)
            for (double v : sl) s = std::max(s, std::abs(v));
        return s;
    }

private:
    TorusGrid slice_grid_;
    TimeMesh mesh_;
    int delta_nodes_;
    double delta_max_;
    std::vector<double> n1_, n2_;
    std::vector<double> times_;
    std::vector<std::vector<double>> slices_;
};

/// Single-particle value function: with one particle the weight is
/// identically 1, the clock never enters the cost, and the dynamic
/// programming equation is the standard quadratic-Hamiltonian HJB,
/// independent of V. Closed form by the log transform.
inline std::vector<ScalarField> solve_v1(const ProblemSpec& prob) {
    prob.validate();
    TimeMesh mesh = prob.mesh();
    std::vector<ScalarField> out;
    out.reserve(static_cast<std::size_t>(mesh.steps) + 1);
    for (int j = 0; j <= mesh.steps; ++j)
        out.push_back(cole_hopf_hjb(prob.terminal, mesh.time(j), mesh.horizon()));
    return out;
}

namespace detail {

/// Upwind difference for the backward-time advection: marching in remaining
/// time tau = T - t the equation reads  dv/dtau = 1/2 Lap v + c dv/ddelta - H,
/// c = V(x1) - V(x2), so data propagates from delta + c dtau and the stable
/// one-sided difference looks toward +delta when c > 0. Out-of-box neighbors
/// are clamped (outflow).
inline double upwind_delta(const std::vector<double>& v, std::size_t base, std::size_t stride,
                           int j, int j_max, double c, double inv_h) {
    if (c > 0.0) {
        if (j == j_max) return 0.0;
        return c * (v[base + stride] - v[base]) * inv_h;
    }
    if (c < 0.0) {
        if (j == 0) return 0.0;
        return c * (v[base] - v[base - stride]) * inv_h;
    }
    return 0.0;
}

}  // namespace detail

/// Exact pair solve in reduced coordinates. Backward march with the same
/// exact spectral diffusion and two-stage explicit update as the density
/// solver, first-order upwind transport in delta. snapshot_times are snapped
/// to mesh nodes; t0 and T are always stored.
inline ValueTable2 solve_v2_reduced(const ProblemSpec& prob, double delta_max, int delta_nodes,
                                    std::vector<double> snapshot_times = {}) {
    prob.validate();
    if (prob.grid.dim() != 1) throw ConfigError("solve_v2_reduced: pair reduction needs d = 1");
    TimeMesh mesh = prob.mesh();
    const TorusGrid line = prob.grid;
    const TorusGrid slice(2, line.nodes_per_axis());
    const int m = line.nodes_per_axis();
    const std::size_t nx = slice.size();

    ValueTable2 table(slice, delta_nodes, delta_max, mesh);
    const double h_delta = table.delta_spacing();
    const double v_range = prob.potential.max() - prob.potential.min();
    if (mesh.dt * v_range / h_delta > 1.0 + 1e-12)
        throw ConfigError("solve_v2_reduced: delta advection violates the CFL bound; "
                          "refine dt or coarsen the delta axis");

    // wanted[j] = store the slice at mesh node j
    std::vector<char> wanted(static_cast<std::size_t>(mesh.steps) + 1, 0);
    wanted.front() = wanted.back() = 1;
    for (double t : snapshot_times) {
        auto idx = mesh.node_index(t);
        if (!idx) throw ConfigError("solve_v2_reduced: snapshot time not on the mesh");
        wanted[static_cast<std::size_t>(*idx)] = 1;
    }

    // advection speed c(x1,x2) and weighted Hamiltonian coefficients per node
    const auto& vv = prob.potential.values();
    std::vector<double> speed(nx);
    for (int i1 = 0; i1 < m; ++i1)
        for (int i2 = 0; i2 < m; ++i2)
            speed[static_cast<std::size_t>(i1) * m + i2] = vv[i1] - vv[i2];

    const std::size_t n_delta = static_cast<std::size_t>(delta_nodes);
    const std::size_t total = table.slice_size();
    std::vector<double> v(total);
    {
        const auto& gv = prob.terminal.values();
        for (std::size_t j = 0; j < n_delta; ++j) {
            const double w1 = 1.0 / table.weight_n1()[static_cast<int>(j)];
            const double w2 = 1.0 / table.weight_n2()[static_cast<int>(j)];
            double* slab = v.data() + j * nx;
            for (int i1 = 0; i1 < m; ++i1)
                for (int i2 = 0; i2 < m; ++i2)
                    slab[static_cast<std::size_t>(i1) * m + i2] = w1 * gv[i1] + w2 * gv[i2];
        }
    }

    detail::SpectralWorkspace ws(slice, mesh.dt);
    const double inv_h = 1.0 / h_delta;
    const std::size_t stride = nx;

    std::vector<double> rhs(total), stage(total), acc(total);
    std::vector<double> tmp(nx);
    Spectrum spec(nx);

    auto apply_rhs = [&](const std::vector<double>& in, std::vector<double>& out) {
        // out = c * upwind_delta(in) - sum_i n_i/2 |d_i in|^2, slice by slice
        for (std::size_t j = 0; j < n_delta; ++j) {
            const double n1 = table.weight_n1()[static_cast<int>(j)];
            const double n2 = table.weight_n2()[static_cast<int>(j)];
            std::copy(in.begin() + j * nx, in.begin() + (j + 1) * nx, tmp.begin());
            spec = dft_forward(slice, tmp);
            std::vector<double> d1 = ws.derivative_values(spec, 0);
            std::vector<double> d2 = ws.derivative_values(spec, 1);
            double* o = out.data() + j * nx;
            const std::size_t base0 = j * nx;
            for (std::size_t i = 0; i < nx; ++i) {
                const double adv = detail::upwind_delta(in, base0 + i, stride,
                                                        static_cast<int>(j), delta_nodes - 1,
                                                        speed[i], inv_h);
                o[i] = adv - 0.5 * (n1 * d1[i] * d1[i] + n2 * d2[i] * d2[i]);
            }
        }
    };

    auto diffuse = [&](std::vector<double>& buf) {
        for (std::size_t j = 0; j < n_delta; ++j) {
            std::copy(buf.begin() + j * nx, buf.begin() + (j + 1) * nx, tmp.begin());
            spec = dft_forward(slice, tmp);
            ws.damp(spec);
            std::vector<double> back = dft_inverse(slice, spec);
            std::copy(back.begin(), back.end(), buf.begin() + j * nx);
        }
    };

    const double sup_g = prob.terminal.sup_norm();
    if (wanted[static_cast<std::size_t>(mesh.steps)]) {
        std::vector<double> copy = v;
        table.store(mesh.horizon(), std::move(copy));
    }

    const double dt = mesh.dt;
    for (int step = mesh.steps; step-- > 0;) {
        apply_rhs(v, rhs);
        for (std::size_t i = 0; i < total; ++i) stage[i] = v[i] + dt * rhs[i];
        for (std::size_t i = 0; i < total; ++i) acc[i] = v[i] + 0.5 * dt * rhs[i];
        diffuse(stage);
        diffuse(acc);
        apply_rhs(stage, rhs);
        for (std::size_t i = 0; i < total; ++i) v[i] = acc[i] + 0.5 * dt * rhs[i];

        double sup = 0.0;
        for (double x : v) sup = std::max(sup, std::abs(x));
        if (sup > sup_g + 1e-3)
            throw SolverError("solve_v2_reduced: value exceeded the terminal bound");
        if (wanted[static_cast<std::size_t>(step)]) {
            std::vector<double> copy = v;
            table.store(mesh.time(step), std::move(copy));
        }
    }
    return table;
}

/// Multilinear interpolation, periodic in x1 and x2, within the stored
/// delta box. Throws when |delta| exceeds the box or t has no stored slice.
inline double evaluate_v2(const ValueTable2& table, double t, const ReducedState2& s) {
    if (std::abs(s.delta) > table.delta_max() + 1e-12)
        throw ConfigError("evaluate_v2: delta outside the stored box");
    const std::vector<double>& v = table.slice_at(t);
    const int m = table.x_nodes();
    const std::size_t nx = table.slice_grid().size();

    const double hx = 1.0 / m;
    const double u1 = wrap_unit(s.x1) / hx;
    const double u2 = wrap_unit(s.x2) / hx;
    const int i1 = static_cast<int>(u1) % m;
    const int i2 = static_cast<int>(u2) % m;
    const double f1 = u1 - std::floor(u1);
    const double f2 = u2 - std::floor(u2);

    const double hd = table.delta_spacing();
    double ud = (s.delta + table.delta_max()) / hd;
    ud = std::min(std::max(ud, 0.0), static_cast<double>(table.delta_nodes() - 1));
    int j = std::min(static_cast<int>(ud), table.delta_nodes() - 2);
    const double fd = ud - j;

    auto at = [&](int jj, int a, int b) {
        return v[static_cast<std::size_t>(jj) * nx + static_cast<std::size_t>(a) * m + b];
    };
    const int i1n = (i1 + 1) % m;
    const int i2n = (i2 + 1) % m;
    double plane[2];
    for (int dj = 0; dj < 2; ++dj) {
        const double v00 = at(j + dj, i1, i2);
        const double v01 = at(j + dj, i1, i2n);
        const double v10 = at(j + dj, i1n, i2);
        const double v11 = at(j + dj, i1n, i2n);
        plane[dj] = (1.0 - f1) * ((1.0 - f2) * v00 + f2 * v01) +
                    f1 * ((1.0 - f2) * v10 + f2 * v11);
    }
    return (1.0 - fd) * plane[0] + fd * plane[1];
}

/// Pair value in the original coordinates: only the clock difference enters.
inline double evaluate_vn(const ValueTable2& table, double t, const std::array<double, 2>& x,
                          const std::array<double, 2>& a) {
    return evaluate_v2(table, t, ReducedState2{x[0], x[1], a[0] - a[1]});
}

/// One row of the finite-vs-limit comparison.
struct LimitGapRow {
    double x1 = 0.0, x2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
    double value_n = 0.0;       // v^N at the sample
    double value_limit = 0.0;   // limiting value on the mollified empirical measure
    double gap = 0.0;           // |v^N - V|
    double rhs = 0.0;           // sqrt(sum (1/n^i)^2)
    double ratio = 0.0;
    double mollify_error = 0.0;   // H^{-k} atom-vs-density distance
};

struct LimitGapTable {
    int n_particles = 0;
    std::vector<LimitGapRow> rows;
    double max_ratio = 0.0;
    double sup_value_bound_defect = 0.0;   // max(||v||_inf - ||g||_inf, 0)
};

struct CompareOptions {
    int samples = 20;
    std::uint64_t seed = 1;
    double clock_box = 0.75;   // a^i uniform in [-clock_box, clock_box]
    int delta_nodes = 65;
    double delta_pad = 0.05;
    double mollify_eps = 0.0;   // 0: measure-module default
    PicardOptions picard;
};

/// Evaluate the two-sided gap |v^N - V(t0, mu^N_{x,a})| against the weight
/// norm sqrt(sum_i (1/n^i[a])^2) at iid uniform samples of (x, a). One pair
/// PDE solve is shared by all samples; each sample runs its own mean-field
/// solve on the mollified two-atom (or one-atom) measure.
inline LimitGapTable compare_to_limit(const ProblemSpec& prob, int n_particles,
                                      const CompareOptions& opt = {}) {
    prob.validate();
    if (n_particles != 1 && n_particles != 2)
        throw ConfigError("compare_to_limit: exact solves exist only for 1 or 2 particles");
    if (prob.grid.dim() != 1) throw ConfigError("compare_to_limit: needs d = 1");

    constexpr std::uint64_t kSampleStep = 0x53414D50;   // draw-phase tag

    LimitGapTable out;
    out.n_particles = n_particles;

    std::optional<ValueTable2> table;
    std::vector<ScalarField> v1;
    double sup_value = 0.0;
    if (n_particles == 2) {
        const double span = prob.horizon - prob.t0;
        const double delta_box = 2.0 * opt.clock_box;
        const double dmax =
            delta_box + span * (prob.potential.max() - prob.potential.min()) + opt.delta_pad;
        table.emplace(solve_v2_reduced(prob, dmax, opt.delta_nodes, {prob.t0}));
        sup_value = table->sup_norm();
    } else {
        v1 = solve_v1(prob);
        for (const auto& f : v1) sup_value = std::max(sup_value, f.sup_norm());
    }
    out.sup_value_bound_defect = std::max(0.0, sup_value - prob.terminal.sup_norm());

    for (int s = 0; s < opt.samples; ++s) {
        LimitGapRow row;
        const auto rep = static_cast<std::uint64_t>(s);
        row.x1 = rng::uniform(opt.seed, rep, 0, kSampleStep, 0);
        row.a1 = opt.clock_box * (2.0 * rng::uniform(opt.seed, rep, 0, kSampleStep, 1) - 1.0);
        if (n_particles == 2) {
            row.x2 = rng::uniform(opt.seed, rep, 1, kSampleStep, 0);
            row.a2 = opt.clock_box * (2.0 * rng::uniform(opt.seed, rep, 1, kSampleStep, 1) - 1.0);
        }

        std::vector<double> clocks{row.a1};
        std::vector<std::array<double, 2>> atoms{{row.x1, 0.0}};
        if (n_particles == 2) {
            clocks.push_back(row.a2);
            atoms.push_back({row.x2, 0.0});
        }
        std::vector<double> w = weights_from_clocks(clocks);
        double rhs2 = 0.0;
        for (double wi : w) rhs2 += wi * wi;
        row.rhs = std::sqrt(rhs2);

        if (n_particles == 2)
            row.value_n = evaluate_vn(*table, prob.t0, {row.x1, row.x2}, {row.a1, row.a2});
        else
            row.value_n = evaluate(v1.front(), {row.x1, 0.0});

        AtomicMeasure mu(1, atoms, w);
        MollifiedMeasure mol = opt.mollify_eps > 0.0
                                   ? mollify_atoms(prob.grid, mu, opt.mollify_eps,
                                                   SobolevIndex::default_for_dim(1))
                                   : mollify_atoms(prob.grid, mu);
        row.mollify_error = mol.h_dual_error;
        MFCSolution sol = solve_mean_field(prob, mol.density, opt.picard);
        row.value_limit = sol.value;
        row.gap = std::abs(row.value_n - row.value_limit);
        row.ratio = row.gap / row.rhs;
        out.max_ratio = std::max(out.max_ratio, row.ratio);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace skmfc
