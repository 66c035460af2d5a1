#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "skmfc/errors.hpp"
#include "skmfc/field.hpp"
#include "skmfc/grid.hpp"
#include "skmfc/picard.hpp"
#include "skmfc/problem.hpp"

namespace skmfc {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
    }
}

}  // namespace detail

/// One trigonometric mode a*cos(2pi n.x) + b*sin(2pi n.x).
struct FieldMode {
    std::array<int, 2> n{0, 0};
    double cos_amp = 0.0;
    double sin_amp = 0.0;
};

/// Declarative scalar field: constant offset plus a list of trigonometric modes.
/// JSON forms: a preset name ("zero", "one", "one_plus_cos", "cos", "sin"),
/// {"constant": c}, or {"offset": c, "modes": [{"n": [1], "cos": a, "sin": b}, ...]}.
struct FieldSpec {
    double offset = 0.0;
    std::vector<FieldMode> modes;

    static FieldSpec preset(const std::string& name) {
        FieldSpec s;
        if (name == "zero") return s;
        if (name == "one") {
            s.offset = 1.0;
            return s;
        }
        if (name == "one_plus_cos") {
            s.offset = 1.0;
            s.modes.push_back({{1, 0}, 1.0, 0.0});
            return s;
        }
        if (name == "cos") {
            s.modes.push_back({{1, 0}, 1.0, 0.0});
            return s;
        }
        if (name == "sin") {
            s.modes.push_back({{1, 0}, 0.0, 1.0});
            return s;
        }
        throw ConfigError("unknown field preset \"" + name + "\"");
    }

    static FieldSpec constant(double c) {
        FieldSpec s;
        s.offset = c;
        return s;
    }

    static FieldSpec parse(const Json& j, const std::string& where) {
        if (j.is_string()) return preset(j.get<std::string>());
        if (j.is_number()) return constant(j.get<double>());
        detail::reject_unknown_keys(j, {"constant", "preset", "offset", "modes"}, where);
        if (j.contains("preset")) {
            if (j.size() != 1) throw ConfigError(where + ": \"preset\" excludes other keys");
            return preset(j.at("preset").get<std::string>());
        }
        if (j.contains("constant")) {
            if (j.size() != 1) throw ConfigError(where + ": \"constant\" excludes other keys");
            return constant(j.at("constant").get<double>());
        }
        FieldSpec s;
        s.offset = detail::get_or(j, "offset", 0.0);
        if (j.contains("modes")) {
            for (const auto& m : j.at("modes")) {
                detail::reject_unknown_keys(m, {"n", "cos", "sin"}, where + ".modes[]");
                FieldMode mode;
                auto n = m.at("n");
                if (!n.is_array() || n.empty() || n.size() > 2)
                    throw ConfigError(where + ": mode \"n\" must be a 1- or 2-vector of integers");
                mode.n[0] = n[0].get<int>();
                if (n.size() == 2) mode.n[1] = n[1].get<int>();
                mode.cos_amp = detail::get_or(m, "cos", 0.0);
                mode.sin_amp = detail::get_or(m, "sin", 0.0);
                s.modes.push_back(mode);
            }
        }
        return s;
    }

    double operator()(const std::array<double, 2>& x) const {
        double v = offset;
        for (const auto& m : modes) {
            const double phase = two_pi * (m.n[0] * x[0] + m.n[1] * x[1]);
            v += m.cos_amp * std::cos(phase) + m.sin_amp * std::sin(phase);
        }
        return v;
    }

    ScalarField build(const TorusGrid& grid) const {
        for (const auto& m : modes)
            if (grid.dim() == 1 && m.n[1] != 0)
                throw ConfigError("field mode has a second frequency component on a 1-d grid");
        return ScalarField::sample(grid, [this](const std::array<double, 2>& x) { return (*this)(x); });
    }
};

struct SimulateConfig {
    std::int64_t particles = 1000;
    int replications = 8;
    double dt = 1e-3;
    std::vector<double> initial_clocks;   // empty: all zero
    bool zero_control = false;            // skip the mean-field solve, drive alpha = 0
};

struct StudyConfig {
    std::vector<std::int64_t> particle_counts{8, 16, 32, 64, 128, 256, 512};
    int replications = 64;
    double sim_dt = 1e-3;
    std::vector<double> initial_clocks;   // per-particle prefix, zero-padded
    bool include_exact_n2 = true;
};

struct ProbeConfig {
    int pairs = 20;
    double perturbation = 0.25;
    int halvings = 2;
    int time_points = 5;
};

struct SmallNConfig {
    int x_nodes = 64;
    int delta_nodes = 65;
    double delta_margin = 0.05;
    int samples = 20;
    double dt = 0.0;   // 0: use the problem dt
};

/// Full experiment description. Everything the pipeline does is a pure
/// function of this struct plus the seed it carries.
struct ExperimentConfig {
    int dim = 1;
    int nodes_per_axis = 64;
    FieldSpec potential = FieldSpec::preset("one_plus_cos");
    FieldSpec terminal = FieldSpec::preset("sin");
    double t0 = 0.0;
    double horizon = 0.5;
    double dt = 1e-3;
    double radius = 0.0;        // 0: a priori default
    int sobolev_order = 0;      // 0: default for dim
    double mollify_eps = 0.0;   // 0: default 4h^2
    std::string initial_density = "";   // empty: uniform
    Json initial_density_json;          // set when a non-string spec was given
    PicardOptions picard;
    SimulateConfig simulate;
    StudyConfig study;
    ProbeConfig probe;
    SmallNConfig small_n;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string format = "both";   // csv | json | both

    TorusGrid grid() const { return TorusGrid(dim, nodes_per_axis); }

    ProblemSpec problem() const {
        TorusGrid g = grid();
        ProblemSpec p{g, potential.build(g), terminal.build(g), t0, horizon, dt, radius};
        p.validate();
        return p;
    }

    int sobolev_order_effective() const {
        return sobolev_order > 0 ? sobolev_order : SobolevIndex::default_for_dim(dim).k;
    }

    /// Initial density on the grid: uniform unless a field spec was given.
    /// Nonnegative up to rounding, renormalized to unit mass.
    ScalarField initial_measure(const TorusGrid& g) const {
        ScalarField raw = [&] {
            if (!initial_density_json.is_null())
                return FieldSpec::parse(initial_density_json, "initial_density").build(g);
            if (initial_density.empty() || initial_density == "uniform")
                return ScalarField::constant(g, 1.0);
            return FieldSpec::preset(initial_density).build(g);
        }();
        if (raw.min() < -1e-9)
            throw ConfigError("initial_density is negative (min " + std::to_string(raw.min()) + ")");
        if (raw.integral() <= 0.0) throw ConfigError("initial_density has nonpositive mass");
        std::vector<double> vals = raw.values();
        for (double& v : vals)
            if (v < 0.0) v = 0.0;
        double mass = 0.0;
        for (double v : vals) mass += v;
        mass *= g.cell_volume();
        for (double& v : vals) v /= mass;
        return ScalarField(g, std::move(vals));
    }

    static ExperimentConfig from_json(const Json& j);
    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("config parse failure: ") + e.what());
        }
        return from_json(j);
    }
};

inline ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    detail::reject_unknown_keys(
        j,
        {"dim", "nodes_per_axis", "potential", "terminal", "t0", "horizon", "dt", "radius",
         "sobolev_order", "mollify_eps", "initial_density", "picard", "simulate", "study", "probe",
         "small_n", "seed", "output_dir", "format"},
        "config");
    ExperimentConfig c;
    c.dim = detail::get_or(j, "dim", c.dim);
    c.nodes_per_axis = detail::get_or(j, "nodes_per_axis", c.nodes_per_axis);
    if (j.contains("potential")) c.potential = FieldSpec::parse(j.at("potential"), "potential");
    if (j.contains("terminal")) c.terminal = FieldSpec::parse(j.at("terminal"), "terminal");
    c.t0 = detail::get_or(j, "t0", c.t0);
    c.horizon = detail::get_or(j, "horizon", c.horizon);
    c.dt = detail::get_or(j, "dt", c.dt);
    c.radius = detail::get_or(j, "radius", c.radius);
    c.sobolev_order = detail::get_or(j, "sobolev_order", c.sobolev_order);
    c.mollify_eps = detail::get_or(j, "mollify_eps", c.mollify_eps);
    if (j.contains("initial_density")) {
        const auto& d = j.at("initial_density");
        if (d.is_string())
            c.initial_density = d.get<std::string>();
        else
            c.initial_density_json = d;
    }
    if (j.contains("picard")) {
        const auto& p = j.at("picard");
        detail::reject_unknown_keys(p, {"tol", "max_iter", "damping"}, "picard");
        c.picard.tol = detail::get_or(p, "tol", c.picard.tol);
        c.picard.max_iter = detail::get_or(p, "max_iter", c.picard.max_iter);
        c.picard.damping = detail::get_or(p, "damping", c.picard.damping);
    }
    if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        detail::reject_unknown_keys(
            s, {"particles", "replications", "dt", "initial_clocks", "zero_control"}, "simulate");
        c.simulate.particles = detail::get_or(s, "particles", c.simulate.particles);
        c.simulate.replications = detail::get_or(s, "replications", c.simulate.replications);
        c.simulate.dt = detail::get_or(s, "dt", c.simulate.dt);
        c.simulate.initial_clocks =
            detail::get_or(s, "initial_clocks", c.simulate.initial_clocks);
        c.simulate.zero_control = detail::get_or(s, "zero_control", c.simulate.zero_control);
    }
    if (j.contains("study")) {
        const auto& s = j.at("study");
        detail::reject_unknown_keys(
            s, {"particle_counts", "replications", "sim_dt", "initial_clocks", "include_exact_n2"},
            "study");
        c.study.particle_counts = detail::get_or(s, "particle_counts", c.study.particle_counts);
        c.study.replications = detail::get_or(s, "replications", c.study.replications);
        c.study.sim_dt = detail::get_or(s, "sim_dt", c.study.sim_dt);
        c.study.initial_clocks = detail::get_or(s, "initial_clocks", c.study.initial_clocks);
        c.study.include_exact_n2 = detail::get_or(s, "include_exact_n2", c.study.include_exact_n2);
    }
    if (j.contains("probe")) {
        const auto& p = j.at("probe");
        detail::reject_unknown_keys(p, {"pairs", "perturbation", "halvings", "time_points"},
                                    "probe");
        c.probe.pairs = detail::get_or(p, "pairs", c.probe.pairs);
        c.probe.perturbation = detail::get_or(p, "perturbation", c.probe.perturbation);
        c.probe.halvings = detail::get_or(p, "halvings", c.probe.halvings);
        c.probe.time_points = detail::get_or(p, "time_points", c.probe.time_points);
    }
    if (j.contains("small_n")) {
        const auto& s = j.at("small_n");
        detail::reject_unknown_keys(
            s, {"x_nodes", "delta_nodes", "delta_margin", "samples", "dt"}, "small_n");
        c.small_n.x_nodes = detail::get_or(s, "x_nodes", c.small_n.x_nodes);
        c.small_n.delta_nodes = detail::get_or(s, "delta_nodes", c.small_n.delta_nodes);
        c.small_n.delta_margin = detail::get_or(s, "delta_margin", c.small_n.delta_margin);
        c.small_n.samples = detail::get_or(s, "samples", c.small_n.samples);
        c.small_n.dt = detail::get_or(s, "dt", c.small_n.dt);
    }
    c.seed = detail::get_or(j, "seed", c.seed);
    c.output_dir = detail::get_or(j, "output_dir", c.output_dir);
    c.format = detail::get_or(j, "format", c.format);
    if (c.format != "csv" && c.format != "json" && c.format != "both")
        throw ConfigError("format must be csv, json, or both");
    if (c.simulate.particles < 1) throw ConfigError("simulate.particles must be positive");
    if (c.simulate.replications < 1) throw ConfigError("simulate.replications must be positive");
    if (c.study.replications < 1) throw ConfigError("study.replications must be positive");
    for (auto n : c.study.particle_counts)
        if (n < 1) throw ConfigError("study.particle_counts entries must be positive");
    if (c.probe.pairs < 1) throw ConfigError("probe.pairs must be positive");
    return c;
}

}  // namespace skmfc
