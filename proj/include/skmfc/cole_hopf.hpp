#pragma once

#include <cmath>

#include "skmfc/errors.hpp"
#include "skmfc/field.hpp"

namespace skmfc {

/// Closed-form solution of the potential-free backward equation
///     -du/dt - 1/2 Laplacian(u) + 1/2 |grad u|^2 = 0,  u(T) = g,
/// via the exponential substitution: u(t) = -log( P_{T-t} exp(-g) ).
/// Serves as the reference everything potential-free is checked against.
inline ScalarField cole_hopf_hjb(const ScalarField& g, double t, double horizon) {
    if (t > horizon) throw ConfigError("cole_hopf_hjb: t must be <= horizon");
    std::vector<double> v(g.values());
    for (double& x : v) x = std::exp(-x);
    ScalarField w = heat_propagate(ScalarField(g.grid(), std::move(v)), horizon - t);
    std::vector<double> u(w.values());
    for (double& x : u) {
        if (!(x > 0.0)) throw SolverError("cole_hopf_hjb: semigroup output not positive");
        x = -std::log(x);
    }
    return ScalarField(g.grid(), std::move(u));
}

}  // namespace skmfc
