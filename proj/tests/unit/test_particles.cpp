#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/fp.hpp"
#include "skmfc/particles.hpp"
#include "skmfc/rng.hpp"

using namespace skmfc;

namespace {

ProblemSpec basic_problem(int m, std::function<double(std::array<double, 2>)> v,
                          std::function<double(std::array<double, 2>)> g, double horizon,
                          double dt) {
    TorusGrid grid(1, m);
    return ProblemSpec{grid, ScalarField::sample(grid, std::move(v)),
                       ScalarField::sample(grid, std::move(g)), 0.0, horizon, dt};
}

}  // namespace

TEST_CASE("clock weights match closed forms and stay normalized", "[particles]") {
    CHECK(weights_from_clocks({3.7}) == std::vector<double>{1.0});
    CHECK(weights_from_clocks({0.0, 0.0}) == std::vector<double>{0.5, 0.5});

    auto w = weights_from_clocks({std::log(3.0), 0.0});
    CHECK(std::abs(w[0] - 0.25) < 1e-15);
    CHECK(std::abs(w[1] - 0.75) < 1e-15);

    CHECK_THROWS_AS(weights_from_clocks({}), ConfigError);

    // random clock vectors across the full finite range, including +-700
    for (std::size_t trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + (rng::mix(5, trial, 0, 0, 0) % 64);
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i)
            a[i] = 1400.0 * rng::uniform(5, trial, i, 1, 0) - 700.0;
        if (trial % 5 == 0) a[0] = 700.0;
        if (trial % 7 == 0) a[n - 1] = -700.0;
        auto ww = weights_from_clocks(a);
        double total = 0.0;
        for (double x : ww) {
            REQUIRE(std::isfinite(x));
            REQUIRE(x >= 0.0);
            total += x;
        }
        REQUIRE(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("clock weights are bitwise invariant under exact common shifts", "[particles]") {
    const std::vector<double> a{0.25, 1.5, -2.75, 0.0};
    auto w0 = weights_from_clocks(a);
    for (double c : {128.0, -64.5, 1024.25}) {
        std::vector<double> shifted(a);
        for (double& x : shifted) x += c;   // dyadic values, additions are exact
        auto w1 = weights_from_clocks(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(w1[i] == w0[i]);
    }
}

TEST_CASE("reciprocal weights invert the weights", "[particles]") {
    const std::vector<double> a{std::log(3.0), 0.0};
    auto log_n = log_reciprocal_weights(a);
    CHECK(std::abs(std::exp(log_n[0]) - 4.0) < 1e-13);
    CHECK(std::abs(std::exp(log_n[1]) - 4.0 / 3.0) < 1e-13);

    const std::vector<double> b{0.3, -1.2, 2.0, 0.7, 0.7};
    auto w = weights_from_clocks(b);
    auto ln = log_reciprocal_weights(b);
    double recip_sum = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(std::abs(w[i] * std::exp(ln[i]) - 1.0) < 1e-12);
        recip_sum += std::exp(-ln[i]);
    }
    CHECK(std::abs(recip_sum - 1.0) < 1e-12);
}

TEST_CASE("interacting hamiltonian closed forms", "[particles]") {
    TorusGrid grid(1, 8);
    ScalarField v3 = ScalarField::constant(grid, 3.0);

    // single particle: n_1 = 1, H = -V q + p^2/2 = -3 + 2 = -1
    std::vector<std::array<double, 2>> x{{0.3, 0.0}};
    std::vector<std::array<double, 2>> p{{2.0, 0.0}};
    CHECK(std::abs(n_particle_hamiltonian(v3, x, {0.7}, p, {1.0}) - (-1.0)) < 1e-12);

    // momentum in the unused axis is ignored in d = 1
    std::vector<std::array<double, 2>> p_junk{{2.0, 99.0}};
    CHECK(n_particle_hamiltonian(v3, x, {0.7}, p_junk, {1.0}) ==
          n_particle_hamiltonian(v3, x, {0.7}, p, {1.0}));

    // zero momenta kill the quadratic term entirely
    std::vector<std::array<double, 2>> x2{{0.1, 0.0}, {0.6, 0.0}};
    std::vector<std::array<double, 2>> p0{{0.0, 0.0}, {0.0, 0.0}};
    CHECK(n_particle_hamiltonian(v3, x2, {5.0, -2.0}, p0, {0.0, 0.0}) == 0.0);

    // common clock shifts leave the value unchanged
    std::vector<std::array<double, 2>> pp{{1.0, 0.0}, {-0.5, 0.0}};
    const double h0 = n_particle_hamiltonian(v3, x2, {0.4, -1.1}, pp, {0.2, 0.9});
    const double h1 = n_particle_hamiltonian(v3, x2, {0.4 + 37.5, -1.1 + 37.5}, pp, {0.2, 0.9});
    CHECK(std::abs(h1 - h0) < 1e-12);

    CHECK_THROWS_AS(n_particle_hamiltonian(v3, x2, {0.0}, pp, {0.0, 0.0}), ConfigError);
}

TEST_CASE("empirical measure carries softmax weights", "[particles]") {
    ParticleEnsemble e;
    e.dim = 1;
    e.x = {{0.2, 0.0}};
    e.a = {4.2};
    AtomicMeasure single = empirical_measure(e);
    REQUIRE(single.positions().size() == 1);
    CHECK(single.weights()[0] == 1.0);
    CHECK(single.positions()[0][0] == 0.2);

    ParticleEnsemble quad;
    quad.dim = 1;
    quad.x = {{0.1, 0.0}, {0.3, 0.0}, {0.55, 0.0}, {0.9, 0.0}};
    quad.a = {0.0, 0.0, 0.0, 0.0};
    AtomicMeasure uniform = empirical_measure(quad);
    for (double w : uniform.weights()) CHECK(w == 0.25);

    // shifting every clock by an exact constant changes nothing
    ParticleEnsemble shifted = quad;
    for (double& ai : shifted.a) ai += 256.0;
    AtomicMeasure same = empirical_measure(shifted);
    CHECK(same.positions() == uniform.positions());
    CHECK(same.weights() == uniform.weights());

    // a clock 1400 ahead underflows to weight zero and drops out
    ParticleEnsemble spread;
    spread.dim = 1;
    spread.x = {{0.25, 0.0}, {0.75, 0.0}};
    spread.a = {0.0, 1400.0};
    AtomicMeasure survivor = empirical_measure(spread);
    REQUIRE(survivor.positions().size() == 1);
    CHECK(survivor.positions()[0][0] == 0.25);
    CHECK(survivor.weights()[0] == 1.0);
}

TEST_CASE("density sampler reproduces target moments", "[particles]") {
    TorusGrid grid(1, 64);
    ScalarField dens = ScalarField::sample(
        grid, [](std::array<double, 2> x) { return 1.0 + 0.8 * std::cos(two_pi * x[0]); });
    DensitySampler sampler(dens);

    const std::size_t n = 50000;
    double mc = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto x = sampler.sample(101, 0, i);
        REQUIRE(x[0] >= 0.0);
        REQUIRE(x[0] < 1.0);
        CHECK(x[1] == 0.0);
        mc += std::cos(two_pi * x[0]);
        ms += std::sin(two_pi * x[0]);
    }
    mc /= n;
    ms /= n;
    // E cos = 0.4 under 1 + 0.8 cos; var(cos) = 1/2 - 0.16
    CHECK(std::abs(mc - 0.4) < 4.0 * std::sqrt((0.5 - 0.16) / n));
    CHECK(std::abs(ms) < 4.0 * std::sqrt(0.5 / n));

    // identical counters give identical samples
    CHECK(sampler.sample(101, 0, 7) == sampler.sample(101, 0, 7));
    CHECK(sampler.sample(101, 0, 7) != sampler.sample(101, 0, 8));

    CHECK_THROWS_AS(DensitySampler(ScalarField::constant(grid, 0.0)), ConfigError);
}

TEST_CASE("density sampler factors a 2-d product density", "[particles]") {
    TorusGrid grid(2, 32);
    ScalarField dens = ScalarField::sample(grid, [](std::array<double, 2> x) {
        return (1.0 + 0.5 * std::cos(two_pi * x[0])) * (1.0 + 0.5 * std::sin(two_pi * x[1]));
    });
    DensitySampler sampler(dens);

    const std::size_t n = 20000;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto x = sampler.sample(202, 0, i);
        REQUIRE(x[0] >= 0.0);
        REQUIRE(x[0] < 1.0);
        REQUIRE(x[1] >= 0.0);
        REQUIRE(x[1] < 1.0);
        m1 += std::cos(two_pi * x[0]);
        m2 += std::sin(two_pi * x[1]);
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::abs(m1 - 0.25) < 4.0 * std::sqrt(0.5 / n));
    CHECK(std::abs(m2 - 0.25) < 4.0 * std::sqrt(0.5 / n));
}

TEST_CASE("ensemble construction seeds clocks and counters", "[particles]") {
    TorusGrid grid(1, 32);
    ScalarField uniform = ScalarField::constant(grid, 1.0);
    ParticleEnsemble e = make_ensemble(uniform, 1000, 5, 2, 0.2);
    CHECK(e.size() == 1000);
    CHECK(e.dim == 1);
    CHECK(e.seed == 5);
    CHECK(e.replication == 2);
    CHECK(e.step == 0);
    CHECK(e.t == 0.2);
    CHECK(e.t0 == 0.2);
    double mean = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        CHECK(e.a[i] == 0.0);
        CHECK(e.initial_weights[i] == 1.0 / 1000.0);
        CHECK(e.x[i][1] == 0.0);
        mean += e.x[i][0];
    }
    mean /= static_cast<double>(e.size());
    CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / 1000.0));

    std::vector<double> a0{0.5, -0.25, 0.0};
    ParticleEnsemble custom = make_ensemble(uniform, 3, 9, 0, 0.0, &a0);
    CHECK(custom.a == a0);
    CHECK(custom.initial_weights == weights_from_clocks(a0));
    CHECK_THROWS_AS(make_ensemble(uniform, 5, 9, 0, 0.0, &a0), ConfigError);
}

TEST_CASE("free motion has brownian increments", "[particles]") {
    TorusGrid grid(1, 16);
    ScalarField zero_v = ScalarField::constant(grid, 0.0);
    ParticleEnsemble e = make_ensemble(ScalarField::constant(grid, 1.0), 1000, 31, 0, 0.0);
    ZeroFeedback drift;

    const double dt = 1e-3;
    const double sdt = std::sqrt(dt);
    const int steps = 100;
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (int j = 0; j < steps; ++j) {
        std::vector<double> before(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) before[i] = e.x[i][0];
        em_step(e, zero_v, dt, drift);
        for (std::size_t i = 0; i < e.size(); ++i) {
            double d = e.x[i][0] - before[i];
            if (d > 0.5) d -= 1.0;
            if (d < -0.5) d += 1.0;
            const double z = d / sdt;
            sum += z;
            sum_sq += z * z;
            ++count;
        }
    }
    const double n = static_cast<double>(count);
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));

    CHECK(e.step == steps);
    CHECK(std::abs(e.t - steps * dt) < 1e-12);
    for (double ai : e.a) CHECK(ai == 0.0);   // no killing without potential
}

TEST_CASE("steps are bitwise reproducible from the counters", "[particles]") {
    TorusGrid grid(1, 32);
    ScalarField v = ScalarField::sample(
        grid, [](std::array<double, 2> x) { return 1.0 + std::cos(two_pi * x[0]); });
    ScalarField mu0 = ScalarField::constant(grid, 1.0);
    ZeroFeedback drift;

    auto run = [&](std::uint64_t seed) {
        ParticleEnsemble e = make_ensemble(mu0, 64, seed, 0, 0.0);
        for (int j = 0; j < 25; ++j) em_step(e, v, 1e-3, drift);
        return e;
    };
    ParticleEnsemble r1 = run(77);
    ParticleEnsemble r2 = run(77);
    CHECK(r1.x == r2.x);
    CHECK(r1.a == r2.a);

    ParticleEnsemble r3 = run(78);
    CHECK(r1.x != r3.x);
}

TEST_CASE("constant potentials freeze the weights", "[particles]") {
    TorusGrid grid(1, 16);
    ScalarField vc = ScalarField::constant(grid, 2.5);
    ScalarField mu0 = ScalarField::constant(grid, 1.0);
    std::vector<double> a0(16);
    for (std::size_t i = 0; i < a0.size(); ++i) a0[i] = 0.3 * std::sin(1.0 + 2.0 * i);
    ParticleEnsemble e = make_ensemble(mu0, 16, 13, 0, 0.0, &a0);
    std::vector<double> w0 = e.weights();
    ZeroFeedback drift;
    for (int j = 0; j < 50; ++j) {
        em_step(e, vc, 1e-3, drift);
        std::vector<double> w = e.weights();
        for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(std::abs(w[i] - w0[i]) < 1e-12);
    }
    // clocks all advanced by the same total
    for (std::size_t i = 1; i < e.a.size(); ++i)
        CHECK(std::abs((e.a[i] - a0[i]) - (e.a[0] - a0[0])) < 1e-12);
}

TEST_CASE("weight bound guard trips on inconsistent bookkeeping", "[particles]") {
    TorusGrid grid(1, 16);
    ScalarField zero_v = ScalarField::constant(grid, 0.0);
    ScalarField mu0 = ScalarField::constant(grid, 1.0);
    ZeroFeedback drift;

    ParticleEnsemble e = make_ensemble(mu0, 4, 3, 0, 0.0);
    e.initial_weights.assign(4, 1e-20);   // recorded weights far below the real ones
    CHECK_THROWS_AS(em_step(e, zero_v, 1e-3, drift), SolverError);

    ParticleEnsemble e2 = make_ensemble(mu0, 4, 3, 0, 0.0);
    e2.initial_weights.assign(4, 1e-20);
    CHECK_NOTHROW(em_step(e2, zero_v, 1e-3, drift, false));

    // genuine dynamics never trip it
    ScalarField v = ScalarField::sample(
        grid, [](std::array<double, 2> x) { return 1.0 + std::cos(two_pi * x[0]); });
    ParticleEnsemble e3 = make_ensemble(mu0, 32, 3, 0, 0.0);
    for (int j = 0; j < 40; ++j) CHECK_NOTHROW(em_step(e3, v, 1e-3, drift));
}

TEST_CASE("cost estimates hit closed forms", "[particles]") {
    ScalarField mu0 = ScalarField::constant(TorusGrid(1, 32), 1.0);

    // zero drift, constant terminal: every replication pays exactly the constant
    ProblemSpec flat = basic_problem(
        32, [](std::array<double, 2>) { return 0.0; }, [](std::array<double, 2>) { return 0.7; },
        0.5, 1e-2);
    ZeroFeedback zf;
    CostEstimate ce = estimate_cost(flat, zf, mu0, 64, 3, 0.05, 11);
    REQUIRE(ce.per_replication.size() == 3);
    CHECK(std::abs(ce.mean - 0.7) < 1e-12);
    CHECK(ce.std_error < 1e-13);

    // zero terminal and zero drift cost exactly nothing, killing or not
    ProblemSpec killed = basic_problem(
        32, [](std::array<double, 2> x) { return 1.0 + std::cos(two_pi * x[0]); },
        [](std::array<double, 2>) { return 0.0; }, 0.5, 1e-2);
    CostEstimate cz = estimate_cost(killed, zf, mu0, 64, 2, 0.05, 11);
    CHECK(cz.mean == 0.0);
    CHECK(cz.std_error == 0.0);

    // constant drift of size 0.6 over T = 0.5: running cost 0.5 * 0.36 * 0.5
    TimeMesh mesh = TimeMesh::subdivide(0.0, 0.5, 0.05);
    ControlPath cpath;
    cpath.mesh = mesh;
    ScalarField c6 = ScalarField::constant(flat.grid, 0.6);
    for (int j = 0; j <= mesh.steps; ++j) cpath.comp.push_back({c6});
    ControlPathFeedback cf(flat.grid, cpath);
    CostEstimate cd = estimate_cost(flat, cf, mu0, 32, 2, 0.05, 11);
    CHECK(std::abs(cd.mean - (0.5 * 0.36 * 0.5 + 0.7)) < 1e-12);
    CHECK(cd.std_error < 1e-13);

    CHECK_THROWS_AS(estimate_cost(flat, zf, mu0, 8, 0, 0.05, 11), ConfigError);
}

TEST_CASE("cost estimates are deterministic in the seed", "[particles]") {
    ScalarField mu0 = ScalarField::constant(TorusGrid(1, 32), 1.0);
    ProblemSpec prob = basic_problem(
        32, [](std::array<double, 2> x) { return 1.0 + std::cos(two_pi * x[0]); },
        [](std::array<double, 2> x) { return 0.5 + 0.5 * std::sin(two_pi * x[0]); }, 0.25, 1e-2);
    ZeroFeedback zf;
    CostEstimate a = estimate_cost(prob, zf, mu0, 128, 4, 0.01, 21);
    CostEstimate b = estimate_cost(prob, zf, mu0, 128, 4, 0.01, 21);
    CHECK(a.mean == b.mean);
    CHECK(a.per_replication == b.per_replication);

    CostEstimate c = estimate_cost(prob, zf, mu0, 128, 4, 0.01, 22);
    CHECK(a.mean != c.mean);
}

TEST_CASE("adjoint feedback interpolates and clips the drift", "[particles]") {
    TorusGrid grid(1, 64);
    TimeMesh mesh{0.0, 0.5, 2};
    AdjointPath path;
    path.mesh = mesh;
    for (int j = 0; j <= 2; ++j) {
        const double c = 1.0 + j;
        path.u.push_back(ScalarField::sample(
            grid, [c](std::array<double, 2> x) { return c * std::sin(two_pi * x[0]); }));
    }

    MeanFieldFeedback fb(grid, path, 1e9);
    fb.prepare(0.25);   // halfway between the c = 1 and c = 2 slices
    const double c_mid = 1.5;
    for (double x : {0.0, 0.23, 0.61}) {
        auto al = fb({x, 0.0});
        const double expect = -c_mid * two_pi * std::cos(two_pi * x);
        CHECK(std::abs(al[0] - expect) < 1e-10);
        CHECK(al[1] == 0.0);
    }

    MeanFieldFeedback clipped(grid, path, 0.5);
    clipped.prepare(0.25);
    for (double x : {0.0, 0.1, 0.35, 0.77}) {
        auto al = clipped({x, 0.0});
        CHECK(std::abs(al[0]) <= 0.5 + 1e-12);
        const double raw = -c_mid * two_pi * std::cos(two_pi * x);
        if (std::abs(raw) > 0.5) CHECK(al[0] * raw > 0.0);
    }
}

TEST_CASE("weighted empirical measure tracks the killed flow", "[particles]") {
    ProblemSpec prob = basic_problem(
        64, [](std::array<double, 2> x) { return 1.0 + std::cos(two_pi * x[0]); },
        [](std::array<double, 2>) { return 0.0; }, 0.5, 1e-3);
    ScalarField mu0 = ScalarField::constant(prob.grid, 1.0);
    ControlPath alpha = zero_control(prob.grid, prob.mesh());

    RepresentationResult small = representation_distance(prob, alpha, mu0, 500, 1e-3, 1);
    RepresentationResult large = representation_distance(prob, alpha, mu0, 8000, 1e-3, 1);
    CHECK(small.distance > 0.0);
    CHECK(large.distance < small.distance);
    CHECK(large.distance < 0.02);
    CHECK(large.tail_bound < 1e-6);
    CHECK(static_cast<int>(large.pde_path.density.size()) == prob.mesh().steps + 1);

    // independent seeds agree on the magnitude
    RepresentationResult s1 = representation_distance(prob, alpha, mu0, 2000, 1e-3, 2);
    RepresentationResult s2 = representation_distance(prob, alpha, mu0, 2000, 1e-3, 3);
    const double ratio = s1.distance / s2.distance;
    CHECK(ratio > 1.0 / 3.0);
    CHECK(ratio < 3.0);
}
