#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "skmfc/config.hpp"
#include "skmfc/particles.hpp"
#include "skmfc/picard.hpp"
#include "skmfc/report.hpp"
#include "skmfc/small_n.hpp"
#include "skmfc/sobolev.hpp"
#include "skmfc/wasserstein.hpp"

namespace skmfc {

/// Weighted least squares line fit with a normal-approximation CI for the
/// slope. Point weights are 1/sigma_i^2; zero sigmas fall back to a shared
/// nominal scale so exact points do not dominate numerically.
struct SlopeFit {
    bool valid = false;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int points = 0;
};

inline SlopeFit fit_weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<double>& sigma) {
    if (x.size() != y.size() || x.size() != sigma.size())
        throw ConfigError("fit_weighted_line: length mismatch");
    SlopeFit fit;
    fit.points = static_cast<int>(x.size());
    if (x.size() < 2) return fit;
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double sig = std::max(sigma[i], 1e-6);
        const double w = 1.0 / (sig * sig);
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (det <= 0.0) return fit;
    fit.valid = true;
    fit.slope = (s * sxy - sx * sy) / det;
    fit.intercept = (sxx * sy - sx * sxy) / det;
    fit.slope_se = std::sqrt(s / det);
    const double z95 = 1.959963984540054;
    fit.ci_low = fit.slope - z95 * fit.slope_se;
    fit.ci_high = fit.slope + z95 * fit.slope_se;
    return fit;
}

inline std::vector<double> pad_clocks(const std::vector<double>& prefix, std::size_t n) {
    std::vector<double> a(n, 0.0);
    for (std::size_t i = 0; i < prefix.size() && i < n; ++i) a[i] = prefix[i];
    return a;
}

inline nlohmann::json study_meta(const ExperimentConfig& cfg) {
    nlohmann::json m;
    m["seed"] = cfg.seed;
    m["dim"] = cfg.dim;
    m["nodes_per_axis"] = cfg.nodes_per_axis;
    m["dt"] = cfg.dt;
    m["t0"] = cfg.t0;
    m["horizon"] = cfg.horizon;
    m["sobolev_order"] = cfg.sobolev_order_effective();
    m["picard_tol"] = cfg.picard.tol;
    return m;
}

struct StudyRow {
    double n = 0;
    double cost = 0.0;
    double se = 0.0;
    double reference = 0.0;
    double gap = 0.0;
    double rhs = 0.0;    // sqrt(sum_i (1/n^i[a0])^2)
    double ratio = 0.0;  // gap / rhs
    double exact = 0.0;  // 1: PDE row (pair solver), not Monte Carlo
    double failed = 0.0;
};

struct ConvergenceStudyResult {
    double reference_value = 0.0;
    std::vector<StudyRow> rows;
    SlopeFit fit;           // log gap vs log N over the Monte Carlo rows
    double fitted_c = 0.0;  // no-intercept LS coefficient of gap on rhs
};

/// Cost gap between the N-particle system under the mean-field feedback and
/// the limiting value, swept over N. One mean-field solve provides both the
/// reference value and the feedback; each (N, replication) cell is an
/// independent deterministic particle simulation.
inline ConvergenceStudyResult run_convergence_study(const ExperimentConfig& cfg) {
    if (cfg.study.particle_counts.empty()) throw ConfigError("study: empty particle count sweep");
    ProblemSpec prob = cfg.problem();
    ScalarField mu0 = cfg.initial_measure(prob.grid);
    MFCSolution sol = solve_mean_field(prob, mu0, cfg.picard);
    if (!sol.converged) throw SolverError("study: mean-field reference solve did not converge");

    ConvergenceStudyResult out;
    out.reference_value = sol.value;
    MeanFieldFeedback drift(prob.grid, sol.u, sol.radius);

    for (auto n : cfg.study.particle_counts) {
        StudyRow row;
        row.n = static_cast<double>(n);
        std::vector<double> a0 = pad_clocks(cfg.study.initial_clocks, static_cast<std::size_t>(n));
        std::vector<double> w = weights_from_clocks(a0);
        double r2 = 0.0;
        for (double wi : w) r2 += wi * wi;
        row.rhs = std::sqrt(r2);
        try {
            const std::vector<double>* clocks = cfg.study.initial_clocks.empty() ? nullptr : &a0;
            CostEstimate est =
                estimate_cost(prob, drift, mu0, static_cast<std::size_t>(n),
                              cfg.study.replications, cfg.study.sim_dt, cfg.seed, clocks);
            row.cost = est.mean;
            row.se = est.std_error;
            row.reference = sol.value;
            row.gap = std::abs(est.mean - sol.value);
            row.ratio = row.gap / row.rhs;
        } catch (const SolverError&) {
            row.failed = 1.0;
        }
        out.rows.push_back(row);
    }

    if (cfg.study.include_exact_n2 && prob.grid.dim() == 1) {
        CompareOptions copt;
        copt.samples = 4;
        copt.seed = cfg.seed;
        copt.clock_box = cfg.study.initial_clocks.empty() ? 0.0 : 0.75;
        copt.picard = cfg.picard;
        StudyRow row;
        row.n = 2;
        row.exact = 1.0;
        try {
            LimitGapTable t2 = compare_to_limit(prob, 2, copt);
            double gap = 0.0, rhs = 0.0;
            for (const auto& r : t2.rows) {
                gap += r.gap;
                rhs += r.rhs;
            }
            row.gap = gap / t2.rows.size();
            row.rhs = rhs / t2.rows.size();
            row.ratio = t2.max_ratio;
            row.reference = sol.value;
        } catch (const SolverError&) {
            row.failed = 1.0;
        }
        out.rows.push_back(row);
    }

    std::vector<double> lx, ly, ls;
    std::vector<double> gaps, rhss;
    for (const auto& r : out.rows) {
        if (r.failed != 0.0 || r.exact != 0.0 || r.gap <= 0.0) continue;
        lx.push_back(std::log(r.n));
        ly.push_back(std::log(r.gap));
        ls.push_back(r.se > 0.0 ? r.se / r.gap : 0.0);
        gaps.push_back(r.gap);
        rhss.push_back(r.rhs);
    }
    if (lx.size() >= 4) {
        out.fit = fit_weighted_line(lx, ly, ls);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < gaps.size(); ++i) {
            num += gaps[i] * rhss[i];
            den += rhss[i] * rhss[i];
        }
        out.fitted_c = den > 0.0 ? num / den : 0.0;
    }
    return out;
}

inline Report convergence_report(const ConvergenceStudyResult& r, const ExperimentConfig& cfg) {
    Report rep;
    rep.name = "study";
    rep.columns = {"N", "cost", "se", "reference", "gap", "rhs", "ratio", "exact", "failed"};
    for (const auto& row : r.rows)
        rep.rows.push_back({row.n, row.cost, row.se, row.reference, row.gap, row.rhs, row.ratio,
                            row.exact, row.failed});
    rep.add_scalar("reference_value", r.reference_value);
    rep.add_scalar("fit_valid", r.fit.valid ? 1.0 : 0.0);
    rep.add_scalar("slope", r.fit.slope);
    rep.add_scalar("slope_se", r.fit.slope_se);
    rep.add_scalar("slope_ci_low", r.fit.ci_low);
    rep.add_scalar("slope_ci_high", r.fit.ci_high);
    rep.add_scalar("fitted_c", r.fitted_c);
    rep.meta = study_meta(cfg);
    return rep;
}

namespace detail {

/// Band-limited random density 1 + eta: Gaussian coefficients on the lowest
/// 8 modes with a 1/n taper, eta clamped to sup norm <= cap so the density
/// stays strictly positive without clipping (mean is exactly 1).
inline ScalarField random_band_density(const TorusGrid& grid, std::uint64_t seed,
                                       std::uint64_t draw, double scale, double cap = 0.45) {
    constexpr std::uint64_t kDrawStep = 0x50455254;   // perturbation-phase tag
    if (grid.dim() != 1) throw ConfigError("random_band_density: d = 1 only");
    std::vector<double> amp_cos(8), amp_sin(8);
    for (int n = 0; n < 8; ++n) {
        amp_cos[n] = scale / (n + 1.0) * rng::normal(seed, draw, n, kDrawStep, 0);
        amp_sin[n] = scale / (n + 1.0) * rng::normal(seed, draw, n, kDrawStep, 1);
    }
    std::vector<double> vals(grid.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i)[0];
        double eta = 0.0;
        for (int n = 0; n < 8; ++n)
            eta += amp_cos[n] * std::cos(two_pi * (n + 1) * x) +
                   amp_sin[n] * std::sin(two_pi * (n + 1) * x);
        vals[i] = eta;
        sup = std::max(sup, std::abs(eta));
    }
    const double damp = sup > cap ? cap / sup : 1.0;
    for (double& v : vals) v = 1.0 + damp * v;
    return ScalarField(grid, std::move(vals));
}

}  // namespace detail

struct RegularityProbeResult {
    int pairs = 0;
    double lipschitz_max = 0.0;           // |dV| / ||dmu||_{H^-k}
    double semiconcavity_max = 0.0;       // midpoint defect / (||dmu||^2/8)
    double semiconcavity_min_num = 0.0;   // most negative midpoint defect observed
    double fp_stability_max = 0.0;        // sup_t ||mu1_t - mu2_t|| / ||dmu_0|| at frozen control
    std::vector<double> scaling_lipschitz;       // per halving level
    std::vector<double> scaling_semiconcavity;   // per halving level
    double duality_defect_rel = 0.0;
    double dpp_defect_rel = 0.0;
    std::vector<std::array<double, 3>> pair_rows;   // (||dmu||, lip ratio, semi ratio)
};

/// Empirical Lipschitz / semi-concavity moduli of the limit value in the
/// dual Sobolev metric, plus flow stability under a frozen control. The
/// constants themselves are unknown; the probe asserts finiteness and
/// scaling stability, never magnitudes.
inline RegularityProbeResult regularity_probe(const ExperimentConfig& cfg) {
    ProblemSpec prob = cfg.problem();
    if (prob.grid.dim() != 1) throw ConfigError("regularity_probe: d = 1 only");
    const SobolevIndex k{cfg.sobolev_order_effective()};
    RegularityProbeResult out;
    out.pairs = cfg.probe.pairs;

    ScalarField uniform0 = cfg.initial_measure(prob.grid);
    MFCSolution ref = solve_mean_field(prob, uniform0, cfg.picard);
    ControlPath frozen = ref.alpha;

    auto value_of = [&](const ScalarField& mu) {
        return solve_mean_field(prob, mu, cfg.picard).value;
    };

    for (int p = 0; p < cfg.probe.pairs; ++p) {
        ScalarField mu1 = detail::random_band_density(prob.grid, cfg.seed, 2 * p,
                                                      cfg.probe.perturbation);
        ScalarField mu2 = detail::random_band_density(prob.grid, cfg.seed, 2 * p + 1,
                                                      cfg.probe.perturbation);
        ScalarField diff = mu2 - mu1;
        const double dn = h_dual_norm(diff, k);
        if (dn <= 0.0) continue;
        const double v1 = value_of(mu1);
        const double v2 = value_of(mu2);
        std::vector<double> mid(prob.grid.size());
        for (std::size_t i = 0; i < mid.size(); ++i)
            mid[i] = 0.5 * (mu1.values()[i] + mu2.values()[i]);
        const double vm = value_of(ScalarField(prob.grid, std::move(mid)));

        const double lip = std::abs(v2 - v1) / dn;
        const double num = 0.5 * v1 + 0.5 * v2 - vm;
        const double semi = num / (dn * dn / 8.0);
        out.lipschitz_max = std::max(out.lipschitz_max, lip);
        out.semiconcavity_max = std::max(out.semiconcavity_max, semi);
        out.semiconcavity_min_num = std::min(out.semiconcavity_min_num, num);
        out.pair_rows.push_back({dn, lip, semi});

        MeasurePath flow1 = solve_fokker_planck(prob, frozen, mu1);
        MeasurePath flow2 = solve_fokker_planck(prob, frozen, mu2);
        double sup_ratio = 0.0;
        for (std::size_t j = 0; j < flow1.density.size(); ++j) {
            ScalarField d = flow2.density[j] - flow1.density[j];
            sup_ratio = std::max(sup_ratio, h_dual_norm(d, k) / dn);
        }
        out.fp_stability_max = std::max(out.fp_stability_max, sup_ratio);
    }

    // scaling family: fixed base and direction, perturbation size halving
    ScalarField base = detail::random_band_density(prob.grid, cfg.seed, 1000, cfg.probe.perturbation);
    ScalarField dir_density =
        detail::random_band_density(prob.grid, cfg.seed, 1001, cfg.probe.perturbation);
    const double v_base = value_of(base);
    for (int level = 0; level <= cfg.probe.halvings; ++level) {
        const double s = std::pow(0.5, level);
        std::vector<double> end(prob.grid.size()), mid(prob.grid.size());
        for (std::size_t i = 0; i < end.size(); ++i) {
            const double eta = dir_density.values()[i] - 1.0;
            end[i] = base.values()[i] + s * eta;
            mid[i] = base.values()[i] + 0.5 * s * eta;
        }
        ScalarField mu_end(prob.grid, std::move(end));
        ScalarField mu_mid(prob.grid, std::move(mid));
        if (mu_end.min() <= 0.0)
            throw SolverError("regularity_probe: scaling family lost positivity");
        ScalarField diff = mu_end - base;
        const double dn = h_dual_norm(diff, k);
        const double v_end = value_of(mu_end);
        const double v_mid = value_of(mu_mid);
        out.scaling_lipschitz.push_back(std::abs(v_end - v_base) / dn);
        out.scaling_semiconcavity.push_back((0.5 * v_base + 0.5 * v_end - v_mid) / (dn * dn / 8.0));
    }

    DualityDefect dd = duality_defect(prob, ref);
    out.duality_defect_rel = dd.relative;
    DppDefect dpp = dpp_defect(prob, uniform0, 0.5 * (prob.t0 + prob.horizon), cfg.picard);
    out.dpp_defect_rel = dpp.relative;
    return out;
}

inline Report regularity_report(const RegularityProbeResult& r, const ExperimentConfig& cfg) {
    Report rep;
    rep.name = "probe_measure";
    rep.columns = {"dual_norm", "lipschitz_ratio", "semiconcavity_ratio"};
    for (const auto& row : r.pair_rows) rep.rows.push_back({row[0], row[1], row[2]});
    rep.add_scalar("pairs", r.pairs);
    rep.add_scalar("lipschitz_max", r.lipschitz_max);
    rep.add_scalar("semiconcavity_max", r.semiconcavity_max);
    rep.add_scalar("semiconcavity_min_num", r.semiconcavity_min_num);
    rep.add_scalar("fp_stability_max", r.fp_stability_max);
    for (std::size_t i = 0; i < r.scaling_lipschitz.size(); ++i) {
        rep.add_scalar("scaling_lipschitz_" + std::to_string(i), r.scaling_lipschitz[i]);
        rep.add_scalar("scaling_semiconcavity_" + std::to_string(i), r.scaling_semiconcavity[i]);
    }
    rep.add_scalar("duality_defect_rel", r.duality_defect_rel);
    rep.add_scalar("dpp_defect_rel", r.dpp_defect_rel);
    rep.meta = study_meta(cfg);
    return rep;
}

struct TimeRegularityResult {
    std::vector<double> ladder;            // evaluation times
    std::vector<double> values;            // limit value at each time, fixed measure
    double time_lipschitz_max = 0.0;       // |dV| / dt over adjacent ladder times
    double holder_half_max = 0.0;          // d_1(mu_t2, mu_t1) / sqrt(t2 - t1), optimal flow
    double holder_half_max_refined = 0.0;  // same at dt/2
    double time_lipschitz_max_refined = 0.0;
    double cole_hopf_defect = 0.0;         // V = 0: solver value vs closed form, max over ladder
};

/// Time regularity of the limit value at fixed measure and Holder-1/2
/// regularity of the optimal flow, with a refinement pass and a closed-form
/// degenerate check (no killing: the value is the averaged log transform).
inline TimeRegularityResult time_regularity_probe(const ExperimentConfig& cfg) {
    ProblemSpec prob = cfg.problem();
    if (prob.grid.dim() != 1) throw ConfigError("time_regularity_probe: d = 1 only");
    TimeRegularityResult out;
    ScalarField mu_ref = cfg.initial_measure(prob.grid);

    const int points = std::max(2, cfg.probe.time_points);
    const double span = prob.horizon - prob.t0;
    for (int i = 0; i < points; ++i)
        out.ladder.push_back(prob.t0 + span * i / points);

    auto ladder_values = [&](double dt) {
        std::vector<double> vals;
        for (double t : out.ladder) {
            ProblemSpec p = prob;
            p.t0 = t;
            p.dt = dt;
            vals.push_back(solve_mean_field(p, mu_ref, cfg.picard).value);
        }
        return vals;
    };
    auto max_time_lip = [&](const std::vector<double>& vals) {
        double m = 0.0;
        for (std::size_t i = 1; i < vals.size(); ++i)
            m = std::max(m, std::abs(vals[i] - vals[i - 1]) /
                                (out.ladder[i] - out.ladder[i - 1]));
        return m;
    };
    out.values = ladder_values(prob.dt);
    out.time_lipschitz_max = max_time_lip(out.values);
    out.time_lipschitz_max_refined = max_time_lip(ladder_values(0.5 * prob.dt));

    auto flow_holder = [&](double dt) {
        ProblemSpec p = prob;
        p.dt = dt;
        MFCSolution sol = solve_mean_field(p, mu_ref, cfg.picard);
        TimeMesh mesh = p.mesh();
        double m = 0.0;
        for (std::size_t i = 0; i < out.ladder.size(); ++i) {
            auto ni = mesh.node_index(out.ladder[i]);
            if (!ni) continue;
            for (std::size_t j = i + 1; j < out.ladder.size(); ++j) {
                auto nj = mesh.node_index(out.ladder[j]);
                if (!nj) continue;
                const double d1 = wasserstein1_circle(sol.mu.at(*ni), sol.mu.at(*nj));
                m = std::max(m, d1 / std::sqrt(out.ladder[j] - out.ladder[i]));
            }
        }
        return m;
    };
    out.holder_half_max = flow_holder(prob.dt);
    out.holder_half_max_refined = flow_holder(0.5 * prob.dt);

    {
        ProblemSpec p0 = prob;
        p0.potential = ScalarField::constant(prob.grid, 0.0);
        for (double t : out.ladder) {
            ProblemSpec p = p0;
            p.t0 = t;
            const double solver = solve_mean_field(p, mu_ref, cfg.picard).value;
            ScalarField u = cole_hopf_hjb(p.terminal, t, p.horizon);
            const double oracle = pair_with_density(u, mu_ref);
            out.cole_hopf_defect = std::max(out.cole_hopf_defect, std::abs(solver - oracle));
        }
    }
    return out;
}

inline Report time_regularity_report(const TimeRegularityResult& r, const ExperimentConfig& cfg) {
    Report rep;
    rep.name = "probe_time";
    rep.columns = {"t", "value"};
    for (std::size_t i = 0; i < r.ladder.size(); ++i)
        rep.rows.push_back({r.ladder[i], r.values[i]});
    rep.add_scalar("time_lipschitz_max", r.time_lipschitz_max);
    rep.add_scalar("time_lipschitz_max_refined", r.time_lipschitz_max_refined);
    rep.add_scalar("holder_half_max", r.holder_half_max);
    rep.add_scalar("holder_half_max_refined", r.holder_half_max_refined);
    rep.add_scalar("cole_hopf_defect", r.cole_hopf_defect);
    rep.meta = study_meta(cfg);
    return rep;
}

inline Report limit_gap_report(const LimitGapTable& t, const ExperimentConfig& cfg) {
    Report rep;
    rep.name = "small_n";
    rep.columns = {"x1", "x2", "a1", "a2", "value_n", "value_limit", "gap", "rhs", "ratio",
                   "mollify_error"};
    for (const auto& r : t.rows)
        rep.rows.push_back({r.x1, r.x2, r.a1, r.a2, r.value_n, r.value_limit, r.gap, r.rhs,
                            r.ratio, r.mollify_error});
    rep.add_scalar("n_particles", t.n_particles);
    rep.add_scalar("max_ratio", t.max_ratio);
    rep.add_scalar("sup_value_bound_defect", t.sup_value_bound_defect);
    rep.meta = study_meta(cfg);
    return rep;
}

}  // namespace skmfc
