#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "skmfc/config.hpp"
#include "skmfc/report.hpp"
#include "skmfc/study.hpp"

namespace skmfc::cli {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
    int nodes = 0;
    int dim = 0;
    double dt = 0.0;
    double horizon = 0.0;
    double t0 = 0.0;
    double tol = 0.0;
    std::int64_t particles = 0;
    int replications = 0;
};

inline void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config_path, "experiment config (JSON)");
    sub->add_option("--seed", f.seed, "master seed override");
    sub->add_option("--out", f.out, "output directory override");
    sub->add_option("--format", f.format, "report format: csv, json, both");
    sub->add_option("--nodes", f.nodes, "grid nodes per axis override");
    sub->add_option("--dim", f.dim, "dimension override (1 or 2)");
    sub->add_option("--dt", f.dt, "time step override");
    sub->add_option("--horizon", f.horizon, "horizon override");
    sub->add_option("--t0", f.t0, "start time override");
    sub->add_option("--tol", f.tol, "fixed-point tolerance override");
    sub->add_option("--particles", f.particles, "particle count override (simulate)");
    sub->add_option("--replications", f.replications, "replication count override");
}

inline ExperimentConfig resolve_config(const CLI::App* sub, const CommonFlags& f) {
    ExperimentConfig cfg =
        f.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(f.config_path);
    if (sub->count("--seed")) cfg.seed = f.seed;
    if (sub->count("--out")) cfg.output_dir = f.out;
    if (sub->count("--format")) {
        if (f.format != "csv" && f.format != "json" && f.format != "both")
            throw ConfigError("format must be csv, json, or both");
        cfg.format = f.format;
    }
    if (sub->count("--nodes")) cfg.nodes_per_axis = f.nodes;
    if (sub->count("--dim")) cfg.dim = f.dim;
    if (sub->count("--dt")) cfg.dt = f.dt;
    if (sub->count("--horizon")) cfg.horizon = f.horizon;
    if (sub->count("--t0")) cfg.t0 = f.t0;
    if (sub->count("--tol")) cfg.picard.tol = f.tol;
    if (sub->count("--particles")) cfg.simulate.particles = f.particles;
    if (sub->count("--replications")) {
        cfg.simulate.replications = f.replications;
        cfg.study.replications = f.replications;
    }
    return cfg;
}

inline int cmd_solve_mfc(const ExperimentConfig& cfg) {
    ProblemSpec prob = cfg.problem();
    ScalarField mu0 = cfg.initial_measure(prob.grid);
    MFCSolution sol = solve_mean_field(prob, mu0, cfg.picard);
    DualityDefect dd = duality_defect(prob, sol);

    Report rep;
    rep.name = "solve_mfc";
    rep.columns = {"t", "kill_mean", "value_pairing", "density_min", "adjoint_sup"};
    TimeMesh mesh = prob.mesh();
    for (int j = 0; j <= mesh.steps; ++j) {
        const ScalarField& mu = sol.mu.at(j);
        const ScalarField& u = sol.u.at(j);
        rep.rows.push_back({mesh.time(j), pair_with_density(prob.potential, mu),
                            pair_with_density(u, mu), mu.min(), u.sup_norm()});
    }
    rep.add_scalar("value", sol.value);
    rep.add_scalar("iterations", sol.iterations);
    rep.add_scalar("residual", sol.residual);
    rep.add_scalar("converged", sol.converged ? 1.0 : 0.0);
    rep.add_scalar("fallback_engaged", sol.fallback_engaged ? 1.0 : 0.0);
    rep.add_scalar("radius", sol.radius);
    rep.add_scalar("duality_defect_abs", dd.absolute);
    rep.add_scalar("duality_defect_rel", dd.relative);
    rep.add_scalar("max_renorm_drift", sol.mu.max_renorm_drift);
    rep.meta = study_meta(cfg);
    emit_report(rep, cfg.format, cfg.output_dir);
    return sol.converged ? 0 : 3;
}

inline int cmd_simulate(const ExperimentConfig& cfg) {
    ProblemSpec prob = cfg.problem();
    ScalarField mu0 = cfg.initial_measure(prob.grid);
    const std::size_t n = static_cast<std::size_t>(cfg.simulate.particles);
    std::vector<double> clocks = pad_clocks(cfg.simulate.initial_clocks, n);
    const std::vector<double>* a0 = cfg.simulate.initial_clocks.empty() ? nullptr : &clocks;

    double reference = 0.0;
    CostEstimate est;
    if (cfg.simulate.zero_control) {
        ControlPath zero = zero_control(prob.grid, prob.mesh());
        MeasurePath flow = solve_fokker_planck(prob, zero, mu0);
        reference = pair_with_density(prob.terminal, flow.density.back());
        ZeroFeedback drift;
        est = estimate_cost(prob, drift, mu0, n, cfg.simulate.replications, cfg.simulate.dt,
                            cfg.seed, a0);
    } else {
        MFCSolution sol = solve_mean_field(prob, mu0, cfg.picard);
        if (!sol.converged) throw SolverError("simulate: mean-field solve did not converge");
        reference = sol.value;
        MeanFieldFeedback drift(prob.grid, sol.u, sol.radius);
        est = estimate_cost(prob, drift, mu0, n, cfg.simulate.replications, cfg.simulate.dt,
                            cfg.seed, a0);
    }

    std::vector<double> w = weights_from_clocks(clocks);
    double rhs2 = 0.0;
    for (double wi : w) rhs2 += wi * wi;

    Report rep;
    rep.name = "simulate";
    rep.columns = {"replication", "cost"};
    for (std::size_t r = 0; r < est.per_replication.size(); ++r)
        rep.rows.push_back({static_cast<double>(r), est.per_replication[r]});
    rep.add_scalar("mean", est.mean);
    rep.add_scalar("se", est.std_error);
    rep.add_scalar("reference", reference);
    rep.add_scalar("gap", std::abs(est.mean - reference));
    rep.add_scalar("rhs", std::sqrt(rhs2));
    rep.add_scalar("particles", static_cast<double>(n));
    rep.add_scalar("zero_control", cfg.simulate.zero_control ? 1.0 : 0.0);
    rep.meta = study_meta(cfg);
    emit_report(rep, cfg.format, cfg.output_dir);
    return 0;
}

inline int cmd_small_n(const ExperimentConfig& cfg, int n_particles) {
    ExperimentConfig c2 = cfg;
    c2.nodes_per_axis = cfg.small_n.x_nodes;
    if (cfg.small_n.dt > 0.0) c2.dt = cfg.small_n.dt;
    ProblemSpec prob = c2.problem();

    CompareOptions copt;
    copt.samples = cfg.small_n.samples;
    copt.seed = cfg.seed;
    copt.delta_nodes = cfg.small_n.delta_nodes;
    copt.delta_pad = cfg.small_n.delta_margin;
    copt.mollify_eps = cfg.mollify_eps;
    copt.picard = cfg.picard;
    LimitGapTable table = compare_to_limit(prob, n_particles, copt);
    Report rep = limit_gap_report(table, c2);
    emit_report(rep, cfg.format, cfg.output_dir);
    return 0;
}

inline int cmd_study(const ExperimentConfig& cfg) {
    ConvergenceStudyResult res = run_convergence_study(cfg);
    Report rep = convergence_report(res, cfg);
    emit_report(rep, cfg.format, cfg.output_dir, {"N", "gap"});
    bool any_failed = false;
    for (const auto& r : res.rows) any_failed |= r.failed != 0.0;
    return any_failed ? 3 : 0;
}

inline int cmd_probe(const ExperimentConfig& cfg, const std::string& which) {
    if (which == "measure" || which == "both") {
        RegularityProbeResult r = regularity_probe(cfg);
        emit_report(regularity_report(r, cfg), cfg.format, cfg.output_dir);
    }
    if (which == "time" || which == "both") {
        TimeRegularityResult r = time_regularity_probe(cfg);
        emit_report(time_regularity_report(r, cfg), cfg.format, cfg.output_dir);
    }
    return 0;
}

inline int cmd_report(const ExperimentConfig& cfg, const std::string& input) {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open report file " + input);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report parse failure: ") + e.what());
    }
    Report rep = report_from_json(j);
    emit_report(rep, cfg.format, cfg.output_dir);
    return 0;
}

inline int run(int argc, char** argv) {
    CLI::App app{"soft-killing mean-field control toolkit"};
    app.require_subcommand(1);
    CommonFlags f;

    CLI::App* solve = app.add_subcommand("solve-mfc", "coupled forward-backward solve");
    add_common(solve, f);

    CLI::App* simulate = app.add_subcommand("simulate", "particle cost estimate vs the limit");
    add_common(simulate, f);

    int small_particles = 2;
    CLI::App* small = app.add_subcommand("small-n", "exact small-system vs limit comparison");
    add_common(small, f);
    small->add_option("--n", small_particles, "system size (1 or 2)")
        ->check(CLI::Range(1, 2));

    CLI::App* study = app.add_subcommand("study", "convergence sweep over particle counts");
    add_common(study, f);

    std::string probe_which = "both";
    CLI::App* probe = app.add_subcommand("probe", "regularity probes of the limit value");
    add_common(probe, f);
    probe->add_option("--which", probe_which, "measure, time, or both")
        ->check(CLI::IsMember({"measure", "time", "both"}));

    std::string report_input;
    CLI::App* report = app.add_subcommand("report", "re-emit a stored JSON report");
    add_common(report, f);
    report->add_option("--in", report_input, "input report (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (solve->parsed()) return cmd_solve_mfc(resolve_config(solve, f));
    if (simulate->parsed()) return cmd_simulate(resolve_config(simulate, f));
    if (small->parsed()) return cmd_small_n(resolve_config(small, f), small_particles);
    if (study->parsed()) return cmd_study(resolve_config(study, f));
    if (probe->parsed()) return cmd_probe(resolve_config(probe, f), probe_which);
    if (report->parsed()) return cmd_report(resolve_config(report, f), report_input);
    return 2;
}

}  // namespace skmfc::cli
