#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "skmfc/errors.hpp"
#include "skmfc/hamiltonian.hpp"

using namespace skmfc;

TEST_CASE("zero momentum gives zero value and control", "[hamiltonian]") {
    auto h = truncated_hamiltonian({0.0, 0.0}, 2, 1.0);
    CHECK(h.value == 0.0);
    CHECK(h.maximizer[0] == 0.0);
    CHECK(h.maximizer[1] == 0.0);
}

TEST_CASE("momentum inside the ball is the free quadratic", "[hamiltonian]") {
    auto h = truncated_hamiltonian({0.3, 0.4}, 2, 1.0);
    CHECK(std::abs(h.value - 0.125) < 1e-15);
    CHECK(h.maximizer[0] == -0.3);
    CHECK(h.maximizer[1] == -0.4);

    auto h1 = truncated_hamiltonian({-0.6, 9.9}, 1, 1.0);  // second entry ignored in d = 1
    CHECK(std::abs(h1.value - 0.18) < 1e-15);
    CHECK(h1.maximizer[0] == 0.6);
    CHECK(h1.maximizer[1] == 0.0);
}

TEST_CASE("momentum outside the ball clips to the linear branch", "[hamiltonian]") {
    auto h = truncated_hamiltonian({3.0, 4.0}, 2, 1.0);
    CHECK(std::abs(h.value - 4.5) < 1e-15);
    CHECK(std::abs(h.maximizer[0] + 0.6) < 1e-15);
    CHECK(std::abs(h.maximizer[1] + 0.8) < 1e-15);

    auto h1 = truncated_hamiltonian({2.0, 0.0}, 1, 1.0);
    CHECK(std::abs(h1.value - 1.5) < 1e-15);
    CHECK(std::abs(h1.maximizer[0] + 1.0) < 1e-15);
}

TEST_CASE("both branches agree at the clipping radius", "[hamiltonian]") {
    const double r = 0.75;
    auto inside = truncated_hamiltonian({r - 1e-12, 0.0}, 1, r);
    auto outside = truncated_hamiltonian({r + 1e-12, 0.0}, 1, r);
    CHECK(std::abs(inside.value - 0.5 * r * r) < 1e-11);
    CHECK(std::abs(outside.value - 0.5 * r * r) < 1e-11);
    CHECK(std::abs(inside.maximizer[0] - outside.maximizer[0]) < 1e-11);

    // C^1 across the seam: central slope equals the shared derivative |p| = r
    const double eps = 1e-6;
    const double lo = hr_value((r - eps) * (r - eps), r);
    const double hi = hr_value((r + eps) * (r + eps), r);
    CHECK(std::abs((hi - lo) / (2.0 * eps) - r) < 1e-6);
}

TEST_CASE("scalar helpers match the full evaluation", "[hamiltonian]") {
    for (double px : {0.0, 0.2, 0.9, 1.7, -2.4}) {
        for (double r : {0.5, 1.0, 3.0}) {
            auto full = truncated_hamiltonian({px, 0.0}, 1, r);
            CHECK(std::abs(hr_value(px * px, r) - full.value) < 1e-15);
            CHECK(std::abs(-px * hr_clip_factor(px * px, r) - full.maximizer[0]) < 1e-15);
        }
    }
    CHECK_THROWS_AS(truncated_hamiltonian({1.0, 0.0}, 1, 0.0), ConfigError);
    CHECK_THROWS_AS(truncated_hamiltonian({1.0, 0.0}, 1, -2.0), ConfigError);
}

TEST_CASE("value is monotone in the radius and dominated by the free value", "[hamiltonian]") {
    const double p2 = 2.5 * 2.5;
    double prev = 0.0;
    for (double r : {0.5, 1.0, 2.0, 2.5, 4.0}) {
        const double v = hr_value(p2, r);
        CHECK(v >= prev);
        CHECK(v <= 0.5 * p2 + 1e-15);
        prev = v;
    }
    CHECK(hr_value(p2, 4.0) == 0.5 * p2);  // radius beyond |p| restores the quadratic
}
