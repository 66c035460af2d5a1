#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/field.hpp"

namespace skmfc {

/// Uniform time mesh t_j = t0 + j*dt, j = 0..steps. Solvers snap the
/// requested step to an integer subdivision of the horizon.
struct TimeMesh {
    double t0 = 0.0;
    double dt = 0.0;
    int steps = 0;

    double time(int j) const { return t0 + j * dt; }
    int nodes() const { return steps + 1; }
    double horizon() const { return t0 + steps * dt; }

    static TimeMesh subdivide(double t0, double horizon, double dt_request) {
        if (!(dt_request > 0.0)) throw ConfigError("TimeMesh: dt must be positive");
        if (!(horizon > t0)) throw ConfigError("TimeMesh: horizon must exceed t0");
        int steps = std::max(1, static_cast<int>(std::llround((horizon - t0) / dt_request)));
        return TimeMesh{t0, (horizon - t0) / steps, steps};
    }

    /// Index of a mesh node, or nullopt if t is not on the mesh (1e-9 snap).
    std::optional<int> node_index(double t) const {
        double r = (t - t0) / dt;
        int j = static_cast<int>(std::llround(r));
        if (j < 0 || j > steps || std::abs(r - j) > 1e-9 * (1.0 + std::abs(r))) return std::nullopt;
        return j;
    }
};

/// Data of one control problem on the torus: soft-killing rate V >= 0,
/// terminal cost g, horizon [t0, T], target time step, and the control
/// truncation radius (radius <= 0 selects the a-priori default).
struct ProblemSpec {
    TorusGrid grid;
    ScalarField potential;
    ScalarField terminal;
    double t0 = 0.0;
    double horizon = 0.5;
    double dt = 1e-3;
    double radius = 0.0;

    void validate() const {
        require_same_grid(grid, potential.grid(), "ProblemSpec");
        require_same_grid(grid, terminal.grid(), "ProblemSpec");
        if (potential.min() < -1e-12) throw ConfigError("ProblemSpec: potential must be >= 0");
        if (!(horizon > t0)) throw ConfigError("ProblemSpec: horizon must exceed t0");
        if (!(dt > 0.0)) throw ConfigError("ProblemSpec: dt must be positive");
    }

    TimeMesh mesh() const { return TimeMesh::subdivide(t0, horizon, dt); }

    /// R large enough to keep the truncation inactive for the a-priori
    /// gradient radius: 4 (1 + |g|_C1) exp((T - t0) |V|_inf).
    double default_radius() const {
        double g_c1 = terminal.sup_norm();
        for (int axis = 0; axis < grid.dim(); ++axis)
            g_c1 += gradient_component(terminal, axis).sup_norm();
        return 4.0 * (1.0 + g_c1) * std::exp((horizon - t0) * potential.sup_norm());
    }

    double effective_radius() const { return radius > 0.0 ? radius : default_radius(); }
};

/// Density path on a time mesh. Every stored slice integrates to 1 (the
/// forward solver renormalizes per step and records the worst drift) and
/// stays above -1e-10 nodewise in resolved runs.
struct MeasurePath {
    TimeMesh mesh;
    std::vector<ScalarField> density;
    double max_renorm_drift = 0.0;
    double min_value = 0.0;

    const ScalarField& at(int j) const { return density.at(j); }
};

/// Backward value path u_t with its recorded gradient radius.
struct AdjointPath {
    TimeMesh mesh;
    std::vector<ScalarField> u;
    double sup_gradient = 0.0;    // sup over time and space of |grad u|
    double apriori_margin = 0.0;  // max over t of |u_t|_inf - exp(int <V;mu>) |g|_inf

    const ScalarField& at(int j) const { return u.at(j); }
};

/// Feedback drift on the mesh, one component field per axis per node.
struct ControlPath {
    TimeMesh mesh;
    std::vector<std::vector<ScalarField>> comp;   // [time][axis]

    const ScalarField& at(int j, int axis) const { return comp.at(j).at(axis); }
};

}  // namespace skmfc
