#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "skmfc/rng.hpp"

using namespace skmfc;

TEST_CASE("counter rng is a pure function of its coordinates", "[rng]") {
    const double base = rng::uniform(42, 3, 17, 250, 1);
    CHECK(rng::uniform(42, 3, 17, 250, 1) == base);

    // flipping any single coordinate must decorrelate the draw
    CHECK(rng::uniform(43, 3, 17, 250, 1) != base);
    CHECK(rng::uniform(42, 4, 17, 250, 1) != base);
    CHECK(rng::uniform(42, 3, 18, 250, 1) != base);
    CHECK(rng::uniform(42, 3, 17, 251, 1) != base);
    CHECK(rng::uniform(42, 3, 17, 250, 2) != base);

    const double n = rng::normal(7, 0, 5, 9, 4);
    CHECK(rng::normal(7, 0, 5, 9, 4) == n);
    CHECK(rng::normal(7, 0, 5, 10, 4) != n);
}

TEST_CASE("uniform draws stay strictly inside the open unit interval", "[rng]") {
    double lo = 1.0;
    double hi = 0.0;
    for (std::uint64_t p = 0; p < 200; ++p) {
        for (std::uint64_t s = 0; s < 200; ++s) {
            const double u = rng::uniform(9001, 0, p, s, 0);
            REQUIRE(u > 0.0);
            REQUIRE(u < 1.0);
            lo = std::min(lo, u);
            hi = std::max(hi, u);
        }
    }
    // 40k draws should populate both tails of the interval
    CHECK(lo < 1e-3);
    CHECK(hi > 1.0 - 1e-3);
}

TEST_CASE("uniform moments match U(0,1) within sampling error", "[rng]") {
    const std::size_t n = 200000;
    double sum = 0.0;
    double sum_sq = 0.0;
    double lag = 0.0;
    double prev = 0.5;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng::uniform(1234, 0, 0, i, 0);
        sum += u;
        sum_sq += u * u;
        if (i > 0) lag += (u - 0.5) * (prev - 0.5);
        prev = u;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;

    const double mean_se = std::sqrt(1.0 / 12.0 / n);
    CHECK(std::abs(mean - 0.5) < 4.0 * mean_se);

    // var(U)=1/12, var of the sample variance ~ (E[U^4]-E[U^2]^2)/n = (1/5-1/9)/n
    const double var_se = std::sqrt((1.0 / 5.0 - 1.0 / 9.0) / n);
    CHECK(std::abs(var - 1.0 / 12.0) < 4.0 * var_se);

    // lag-1 autocorrelation of consecutive steps
    const double corr = lag / n / (1.0 / 12.0);
    CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("normal draws match N(0,1) within sampling error", "[rng]") {
    const std::size_t n = 200000;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t tail = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = rng::normal(777, 1, i, 0, 0);
        sum += z;
        sum_sq += z * z;
        if (std::abs(z) > 1.959963984540054) ++tail;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;

    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    // var of Z^2 is 2
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));

    const double p = static_cast<double>(tail) / n;
    const double p_se = std::sqrt(0.05 * 0.95 / n);
    CHECK(std::abs(p - 0.05) < 4.0 * p_se);
}

TEST_CASE("normal consumes two dedicated uniform channels", "[rng]") {
    const std::uint64_t seed = 31, rep = 2, part = 11, step = 40, ch = 3;
    const double u1 = rng::uniform(seed, rep, part, step, 2 * ch);
    const double u2 = rng::uniform(seed, rep, part, step, 2 * ch + 1);
    const double expect =
        std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    CHECK(rng::normal(seed, rep, part, step, ch) == expect);

    // adjacent normal channels therefore never share uniforms
    CHECK(rng::normal(seed, rep, part, step, ch) != rng::normal(seed, rep, part, step, ch + 1));
}
