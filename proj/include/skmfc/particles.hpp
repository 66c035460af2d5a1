#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/hamiltonian.hpp"
#include "skmfc/measure.hpp"
#include "skmfc/problem.hpp"
#include "skmfc/rng.hpp"

namespace skmfc {

/// Soft-killing weights from the clock vector: w_i = exp(-a_i) / sum_j exp(-a_j),
/// computed in shifted form so clocks of size ~700 stay finite. The weights
/// always sum to 1 and are invariant under a common clock shift.
inline std::vector<double> weights_from_clocks(const std::vector<double>& a) {
    if (a.empty()) throw ConfigError("weights_from_clocks: empty clock vector");
    double m = a[0];
    for (double x : a) m = std::min(m, x);
    std::vector<double> w(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        w[i] = std::exp(-(a[i] - m));
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

/// log(n_i[a]) = a_i + log sum_j exp(-a_j); n_i is the reciprocal weight.
inline std::vector<double> log_reciprocal_weights(const std::vector<double>& a) {
    double m = a[0];
    for (double x : a) m = std::min(m, x);
    double lse = 0.0;
    for (double x : a) lse += std::exp(-(x - m));
    lse = std::log(lse) - m;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + lse;
    return out;
}

/// N-particle Hamiltonian: -sum_i V(x_i) q_i + sum_i n_i[a]/2 |p_i|^2.
inline double n_particle_hamiltonian(const ScalarField& potential,
                                     const std::vector<std::array<double, 2>>& x,
                                     const std::vector<double>& a,
                                     const std::vector<std::array<double, 2>>& p,
                                     const std::vector<double>& q) {
    const std::size_t n = x.size();
    if (a.size() != n || p.size() != n || q.size() != n)
        throw ConfigError("n_particle_hamiltonian: length mismatch");
    const int d = potential.grid().dim();
    std::vector<double> log_n = log_reciprocal_weights(a);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double p2 = p[i][0] * p[i][0] + (d == 2 ? p[i][1] * p[i][1] : 0.0);
        total += -evaluate(potential, x[i]) * q[i] + 0.5 * std::exp(log_n[i]) * p2;
    }
    return total;
}

/// Interacting ensemble state: positions on the torus, additive killing
/// clocks, and the counters that address the random stream. Weights are
/// never stored; they are recomputed from the clocks on demand.
struct ParticleEnsemble {
    int dim = 1;
    std::vector<std::array<double, 2>> x;
    std::vector<double> a;
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;
    int step = 0;
    double t0 = 0.0;
    double t = 0.0;
    std::vector<double> initial_weights;   // kept for the per-step weight bound

    std::size_t size() const { return x.size(); }
    std::vector<double> weights() const { return weights_from_clocks(a); }
};

inline AtomicMeasure empirical_measure(const ParticleEnsemble& e) {
    std::vector<double> w = weights_from_clocks(e.a);
    std::vector<std::array<double, 2>> pos;
    std::vector<double> pw;
    pos.reserve(e.size());
    pw.reserve(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (w[i] > 0.0) {   // clocks ~700 apart underflow cleanly to weight zero
            pos.push_back(e.x[i]);
            pw.push_back(w[i]);
        }
    }
    return AtomicMeasure::normalized(e.dim, std::move(pos), std::move(pw));
}

/// Inverse-CDF sampler for the piecewise-(bi)linear interpolant of a density
/// given at grid nodes. d = 1 inverts the quadratic per-cell CDF directly;
/// d = 2 draws the first coordinate from the piecewise-linear row marginal,
/// then the second from the linear blend of the two bracketing rows, which
/// samples the bilinear interpolant exactly.
class DensitySampler {
public:
    explicit DensitySampler(const ScalarField& density) : grid_(density.grid()) {
        const int m = grid_.nodes_per_axis();
        const auto& v = density.values();
        if (grid_.dim() == 1) {
            node_.assign(v.begin(), v.end());
            for (double& x : node_) x = std::max(0.0, x);
            build_cell_cdf(node_, cdf_);
        } else {
            rows_.assign(m, std::vector<double>(m, 0.0));
            row_sum_.assign(m, 0.0);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m; ++j) {
                    double val = std::max(0.0, v[static_cast<std::size_t>(i) * m + j]);
                    rows_[i][j] = val;
                    row_sum_[i] += val;
                }
            }
            build_cell_cdf(row_sum_, row_cdf_);
        }
    }

    std::array<double, 2> sample(std::uint64_t seed, std::uint64_t replication,
                                 std::uint64_t particle) const {
        const double u1 = rng::uniform(seed, replication, particle, 0x494E4954ULL, 0);
        if (grid_.dim() == 1) {
            auto [cell, frac] = invert_linear(node_, cdf_, u1);
            return {wrap_unit((cell + frac) * grid_.spacing()), 0.0};
        }
        const double u2 = rng::uniform(seed, replication, particle, 0x494E4954ULL, 1);
        const int m = grid_.nodes_per_axis();
        auto [row, theta] = invert_linear(row_sum_, row_cdf_, u1);
        const double x1 = wrap_unit((row + theta) * grid_.spacing());

        const std::vector<double>& lo = rows_[row];
        const std::vector<double>& hi = rows_[(row + 1) % m];
        std::vector<double> cond(m);
        double total = 0.0;
        for (int j = 0; j < m; ++j) {
            cond[j] = (1.0 - theta) * lo[j] + theta * hi[j];
            total += cond[j];
        }
        if (!(total > 0.0)) return {x1, wrap_unit(u2)};   // marginal boundary, row is empty
        std::vector<double> cond_cdf;
        build_cell_cdf(cond, cond_cdf);
        auto [cell, frac] = invert_linear(cond, cond_cdf, u2);
        return {x1, wrap_unit((cell + frac) * grid_.spacing())};
    }

private:
    // periodic trapezoid cell masses: cell [i,i+1) carries (node_i + node_{i+1})/2
    static void build_cell_cdf(const std::vector<double>& node, std::vector<double>& cdf) {
        const std::size_t m = node.size();
        cdf.assign(m + 1, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            cdf[i + 1] = cdf[i] + 0.5 * (node[i] + node[(i + 1) % m]);
        double total = cdf.back();
        if (!(total > 0.0)) throw ConfigError("DensitySampler: density has no mass");
        for (double& c : cdf) c /= total;
        cdf.back() = 1.0;
    }

    // locate the cell, then invert the quadratic CDF of the linear density
    // a + (b-a) s on it; returns the cell index and the fraction s in [0,1]
    static std::pair<int, double> invert_linear(const std::vector<double>& node,
                                                const std::vector<double>& cdf, double u) {
        const int m = static_cast<int>(node.size());
        int lo = 0, hi = m;
        while (hi - lo > 1) {
            int mid = (lo + hi) / 2;
            (cdf[mid] <= u ? lo : hi) = mid;
        }
        const double a = node[lo];
        const double b = node[(lo + 1) % m];
        const double cell_mass = cdf[lo + 1] - cdf[lo];
        double s;
        if (cell_mass <= 0.0) {
            s = 0.5;
        } else {
            const double r = (u - cdf[lo]) / cell_mass;
            if (std::abs(b - a) < 1e-14 * (a + b + 1e-300)) {
                s = r;
            } else {
                // solve a s + (b-a) s^2/2 = r (a+b)/2 for the cell fraction
                const double c2 = 0.5 * (b - a), c1 = a, c0 = -r * 0.5 * (a + b);
                const double disc = std::max(0.0, c1 * c1 - 4.0 * c2 * c0);
                s = (-c1 + std::sqrt(disc)) / (2.0 * c2);
                if (!(s >= 0.0 && s <= 1.0)) s = std::min(1.0, std::max(0.0, r));
            }
        }
        return {lo, s};
    }

    TorusGrid grid_{1, 8};
    std::vector<double> node_, cdf_;
    std::vector<double> row_sum_, row_cdf_;
    std::vector<std::vector<double>> rows_;
};

/// Drift evaluated from a backward value path: alpha(t,x) = -H^R_p(grad u(t,x)),
/// linear interpolation between mesh slices in time, band-limited (exact
/// trigonometric) evaluation in space.
class MeanFieldFeedback {
public:
    MeanFieldFeedback(const TorusGrid& grid, const AdjointPath& u, double radius)
        : grid_(grid), mesh_(u.mesh), radius_(radius) {
        detail::SpectralWorkspace ws(grid, mesh_.dt);
        coeff_.resize(u.u.size());
        for (std::size_t j = 0; j < u.u.size(); ++j)
            for (int axis = 0; axis < grid.dim(); ++axis) {
                Spectrum dc(grid.size(), 0.0);
                ws.add_derivative(u.u[j].spectrum(), axis, dc);
                coeff_[j][axis] = std::move(dc);
            }
        scratch_[0].resize(grid.size());
        scratch_[1].resize(grid.size());
    }

    /// Interpolate the derivative coefficient tables to time t (call once per
    /// step, before evaluating a batch of particles).
    void prepare(double t) {
        double r = (t - mesh_.t0) / mesh_.dt;
        int j = static_cast<int>(std::floor(r));
        j = std::max(0, std::min(j, mesh_.steps - 1));
        double lam = std::min(1.0, std::max(0.0, r - j));
        for (int axis = 0; axis < grid_.dim(); ++axis) {
            const Spectrum& a = coeff_[j][axis];
            const Spectrum& b = coeff_[j + 1][axis];
            for (std::size_t i = 0; i < a.size(); ++i)
                scratch_[axis][i] = (1.0 - lam) * a[i] + lam * b[i];
        }
    }

    std::array<double, 2> operator()(std::array<double, 2> x) const {
        std::array<double, 2> p{0.0, 0.0};
        p[0] = detail::evaluate_spectrum(grid_, scratch_[0], x);
        if (grid_.dim() == 2) p[1] = detail::evaluate_spectrum(grid_, scratch_[1], x);
        double p2 = p[0] * p[0] + p[1] * p[1];
        double s = -hr_clip_factor(p2, radius_);
        return {s * p[0], s * p[1]};
    }

private:
    TorusGrid grid_;
    TimeMesh mesh_;
    double radius_;
    std::vector<std::array<Spectrum, 2>> coeff_;
    std::array<Spectrum, 2> scratch_;
};

/// Drift read off a ControlPath (used when the drift is a frozen field
/// rather than a value-function feedback).
class ControlPathFeedback {
public:
    ControlPathFeedback(const TorusGrid& grid, const ControlPath& alpha)
        : grid_(grid), mesh_(alpha.mesh) {
        coeff_.resize(alpha.comp.size());
        for (std::size_t j = 0; j < alpha.comp.size(); ++j)
            for (int axis = 0; axis < grid.dim(); ++axis)
                coeff_[j][axis] = alpha.comp[j][axis].spectrum();
        scratch_[0].resize(grid.size());
        scratch_[1].resize(grid.size());
    }

    void prepare(double t) {
        double r = (t - mesh_.t0) / mesh_.dt;
        int j = static_cast<int>(std::floor(r));
        j = std::max(0, std::min(j, mesh_.steps - 1));
        double lam = std::min(1.0, std::max(0.0, r - j));
        for (int axis = 0; axis < grid_.dim(); ++axis) {
            const Spectrum& a = coeff_[j][axis];
            const Spectrum& b = coeff_[j + 1][axis];
            for (std::size_t i = 0; i < a.size(); ++i)
                scratch_[axis][i] = (1.0 - lam) * a[i] + lam * b[i];
        }
    }

    std::array<double, 2> operator()(std::array<double, 2> x) const {
        std::array<double, 2> out{0.0, 0.0};
        out[0] = detail::evaluate_spectrum(grid_, scratch_[0], x);
        if (grid_.dim() == 2) out[1] = detail::evaluate_spectrum(grid_, scratch_[1], x);
        return out;
    }

private:
    TorusGrid grid_;
    TimeMesh mesh_;
    std::vector<std::array<Spectrum, 2>> coeff_;
    std::array<Spectrum, 2> scratch_;
};

struct ZeroFeedback {
    void prepare(double) {}
    std::array<double, 2> operator()(std::array<double, 2>) const { return {0.0, 0.0}; }
};

/// One explicit step: clocks integrate the killing rate at the pre-move
/// position, then positions move by drift plus a sqrt(dt) Gaussian kick,
/// wrapped onto the torus. Throws if the per-step weight bound
/// w_i(t) <= exp((t - t0) max V) w_i(0) fails (it cannot, up to rounding).
template <class Drift>
void em_step(ParticleEnsemble& e, const ScalarField& potential, double dt, Drift& drift,
             bool check_weight_bound = true) {
    const int d = e.dim;
    const double sdt = std::sqrt(dt);
    drift.prepare(e.t);
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double v = evaluate(potential, e.x[i]);
        const auto al = drift(e.x[i]);
        for (int axis = 0; axis < d; ++axis) {
            const double xi = rng::normal(e.seed, e.replication, i, static_cast<std::uint64_t>(e.step),
                                          static_cast<std::uint64_t>(axis));
            e.x[i][axis] = wrap_unit(e.x[i][axis] + al[axis] * dt + sdt * xi);
        }
        e.a[i] += v * dt;
    }
    e.step += 1;
    e.t += dt;
    if (check_weight_bound && !e.initial_weights.empty()) {
        const double factor = std::exp((e.t - e.t0) * potential.max());
        std::vector<double> w = weights_from_clocks(e.a);
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w[i] > factor * e.initial_weights[i] * (1.0 + 1e-9) + 1e-300)
                throw SolverError("em_step: soft-killing weight bound violated");
    }
}

inline ParticleEnsemble make_ensemble(const ScalarField& mu0, std::size_t n, std::uint64_t seed,
                                      std::uint64_t replication, double t0,
                                      const std::vector<double>* a0 = nullptr) {
    DensitySampler sampler(mu0);
    ParticleEnsemble e;
    e.dim = mu0.grid().dim();
    e.seed = seed;
    e.replication = replication;
    e.t0 = t0;
    e.t = t0;
    e.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.x[i] = sampler.sample(seed, replication, i);
    if (a0) {
        if (a0->size() != n) throw ConfigError("make_ensemble: clock vector length mismatch");
        e.a = *a0;
    } else {
        e.a.assign(n, 0.0);
    }
    e.initial_weights = weights_from_clocks(e.a);
    return e;
}

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<double> per_replication;
};

/// Monte Carlo estimate of the N-particle cost under a feedback drift:
/// running cost sum_i w_i(t) |alpha_i|^2/2 dt (left endpoint) plus the
/// weighted terminal cost. Replications only differ through the counter
/// stream, so results are reproducible bit for bit.
template <class Drift>
CostEstimate estimate_cost(const ProblemSpec& prob, Drift& drift, const ScalarField& mu0,
                           std::size_t n_particles, int replications, double sim_dt,
                           std::uint64_t seed, const std::vector<double>* a0 = nullptr,
                           bool check_weight_bound = true) {
    prob.validate();
    if (replications < 1) throw ConfigError("estimate_cost: replications must be >= 1");
    TimeMesh mesh = TimeMesh::subdivide(prob.t0, prob.horizon, sim_dt);
    CostEstimate out;
    out.per_replication.reserve(replications);
    const int d = prob.grid.dim();
    for (int rep = 0; rep < replications; ++rep) {
        ParticleEnsemble e = make_ensemble(mu0, n_particles, seed, rep, prob.t0, a0);
        double cost = 0.0;
        for (int j = 0; j < mesh.steps; ++j) {
            std::vector<double> w = weights_from_clocks(e.a);
            drift.prepare(e.t);
            double step_cost = 0.0;
            for (std::size_t i = 0; i < e.size(); ++i) {
                auto al = drift(e.x[i]);
                double a2 = al[0] * al[0] + (d == 2 ? al[1] * al[1] : 0.0);
                step_cost += 0.5 * w[i] * a2;
            }
            cost += step_cost * mesh.dt;
            em_step(e, prob.potential, mesh.dt, drift, check_weight_bound);
        }
        std::vector<double> w = weights_from_clocks(e.a);
        for (std::size_t i = 0; i < e.size(); ++i) cost += w[i] * evaluate(prob.terminal, e.x[i]);
        out.per_replication.push_back(cost);
    }
    for (double c : out.per_replication) out.mean += c;
    out.mean /= replications;
    if (replications > 1) {
        double var = 0.0;
        for (double c : out.per_replication) var += (c - out.mean) * (c - out.mean);
        var /= (replications - 1);
        out.std_error = std::sqrt(var / replications);
    }
    return out;
}

struct RepresentationResult {
    double distance = 0.0;     // H^-k between weighted empirical and PDE density at T
    double tail_bound = 0.0;
    MeasurePath pde_path;
};

/// Weighted-empirical vs PDE comparison under a shared frozen control path.
inline RepresentationResult representation_distance(const ProblemSpec& prob, const ControlPath& alpha,
                                                    const ScalarField& mu0, std::size_t n_particles,
                                                    double sim_dt, std::uint64_t seed,
                                                    std::uint64_t replication = 0) {
    RepresentationResult out;
    out.pde_path = solve_fokker_planck(prob, alpha, mu0);
    TimeMesh mesh = TimeMesh::subdivide(prob.t0, prob.horizon, sim_dt);
    ControlPathFeedback drift(prob.grid, alpha);
    ParticleEnsemble e = make_ensemble(mu0, n_particles, seed, replication, prob.t0);
    for (int j = 0; j < mesh.steps; ++j) em_step(e, prob.potential, mesh.dt, drift, false);
    AtomicMeasure emp = empirical_measure(e);
    const SobolevIndex k = SobolevIndex::default_for_dim(prob.grid.dim());
    auto dist = h_dual_distance(emp, out.pde_path.density.back(), k);
    out.distance = dist.value;
    out.tail_bound = dist.tail_bound;
    return out;
}

}  // namespace skmfc
