#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "skmfc/errors.hpp"
#include "skmfc/fp.hpp"

using namespace skmfc;

namespace {

ScalarField bump_density(const TorusGrid& g, double amp) {
    return ScalarField::sample(
        g, [amp](const std::array<double, 2>& x) { return 1.0 + amp * std::cos(two_pi * x[0]); });
}

}  // namespace

TEST_CASE("uniform density is stationary under constant killing", "[fp]") {
    TorusGrid g(1, 32);
    ProblemSpec p{g, ScalarField::constant(g, 2.0), ScalarField::constant(g, 0.0), 0.0, 0.5, 1e-3};
    MeasurePath path = solve_fokker_planck(p, zero_control(g, p.mesh()), ScalarField::constant(g, 1.0));
    double err = 0.0;
    for (const ScalarField& mu : path.density)
        for (double v : mu.values()) err = std::max(err, std::abs(v - 1.0));
    CHECK(err < 1e-12);
    CHECK(path.max_renorm_drift < 1e-13);
    CHECK(path.min_value > 1.0 - 1e-12);
}

TEST_CASE("pure diffusion damps a single mode at the exact rate", "[fp]") {
    TorusGrid g(1, 64);
    ProblemSpec p{g, ScalarField::constant(g, 0.0), ScalarField::constant(g, 0.0), 0.0, 0.25, 1e-3};
    MeasurePath path = solve_fokker_planck(p, zero_control(g, p.mesh()), bump_density(g, 0.5));
    const double decay = std::exp(-0.5 * 0.25 * two_pi * two_pi);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double expect = 1.0 + 0.5 * decay * std::cos(two_pi * g.node(i)[0]);
        err = std::max(err, std::abs(path.density.back().values()[i] - expect));
    }
    CHECK(err < 1e-13);
}

TEST_CASE("mass stays one along a generic killing flow", "[fp]") {
    TorusGrid g(1, 64);
    ProblemSpec p{
        g,
        ScalarField::sample(g, [](const std::array<double, 2>& x) { return 1.0 + std::cos(two_pi * x[0]); }),
        ScalarField::constant(g, 0.0), 0.0, 0.5, 1e-3};
    // steady smooth drift pushing mass around while the killing reweighs it
    ControlPath alpha = zero_control(g, p.mesh());
    ScalarField a = ScalarField::sample(
        g, [](const std::array<double, 2>& x) { return 0.4 * std::sin(two_pi * x[0]); });
    for (auto& comp : alpha.comp) comp[0] = a;

    MeasurePath path = solve_fokker_planck(p, alpha, bump_density(g, 0.3));
    for (const ScalarField& mu : path.density) CHECK(std::abs(mu.integral() - 1.0) < 1e-10);
    CHECK(path.min_value > -1e-10);
    // the scheme conserves mass analytically, so the per-step drift the
    // renormalization removes sits far below the dt^2 tolerance
    CHECK(path.max_renorm_drift <= p.dt * p.dt);
    CHECK(path.max_renorm_drift < 1e-12);
    // the killing visibly tilts the density toward the low-rate region
    const ScalarField& last = path.density.back();
    CHECK(last.values()[g.nodes_per_axis() / 2] > last.values()[0]);
}

TEST_CASE("two dimensional flow conserves mass and positivity", "[fp]") {
    TorusGrid g(2, 16);
    ProblemSpec p{
        g,
        ScalarField::sample(g,
                            [](const std::array<double, 2>& x) {
                                return 1.0 + 0.5 * std::cos(two_pi * x[0]) * std::cos(two_pi * x[1]);
                            }),
        ScalarField::constant(g, 0.0), 0.0, 0.2, 2e-3};
    ScalarField mu0 = ScalarField::sample(g, [](const std::array<double, 2>& x) {
        return 1.0 + 0.25 * std::sin(two_pi * x[0]) + 0.25 * std::cos(two_pi * x[1]);
    });
    MeasurePath path = solve_fokker_planck(p, zero_control(g, p.mesh()), mu0);
    for (const ScalarField& mu : path.density) CHECK(std::abs(mu.integral() - 1.0) < 1e-10);
    CHECK(path.min_value > -1e-10);
    CHECK(path.max_renorm_drift < 1e-12);
}

TEST_CASE("under-resolved transport aborts on negativity", "[fp]") {
    TorusGrid g(1, 16);
    ProblemSpec p{g, ScalarField::constant(g, 0.0), ScalarField::constant(g, 0.0), 0.0, 0.5, 0.1};
    ControlPath alpha = zero_control(g, p.mesh());
    ScalarField a = ScalarField::constant(g, 10.0);
    for (auto& comp : alpha.comp) comp[0] = a;
    CHECK_THROWS_AS(solve_fokker_planck(p, alpha, bump_density(g, 0.9)), SolverError);
}

TEST_CASE("forward solve validates its inputs", "[fp]") {
    TorusGrid g(1, 32);
    ProblemSpec p{g, ScalarField::constant(g, 1.0), ScalarField::constant(g, 0.0), 0.0, 0.5, 1e-3};
    ControlPath alpha = zero_control(g, p.mesh());

    CHECK_THROWS_AS(solve_fokker_planck(p, alpha, ScalarField::constant(g, 2.0)), ConfigError);
    CHECK_THROWS_AS(solve_fokker_planck(p, alpha, bump_density(g, 1.5)), ConfigError);
    CHECK_THROWS_AS(solve_fokker_planck(p, zero_control(g, TimeMesh::subdivide(0.0, 0.5, 2e-3)),
                                        ScalarField::constant(g, 1.0)),
                    ConfigError);

    // slightly off-unit mass is absorbed by the exact initial renormalization
    ScalarField near(g, std::vector<double>(g.size(), 1.0 + 5e-9));
    MeasurePath path = solve_fokker_planck(p, alpha, near);
    CHECK(path.density[0].integral() == 1.0);
}
