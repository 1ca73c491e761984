#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "divbench/special.hpp"
#include "oracles.hpp"

using namespace divbench;

TEST_CASE("incomplete beta of the uniform density is the identity") {
    for (double z : {0.0, 0.3, 1.0}) CHECK(incomplete_beta(z, 1.0, 1.0) == Catch::Approx(z).margin(1e-14));
}

TEST_CASE("incomplete beta matches the polynomial antiderivative at (2,3)") {
    // integral of y(1-y)^2 = y^2/2 - 2y^3/3 + y^4/4
    CHECK(incomplete_beta(0.5, 2.0, 3.0) == Catch::Approx(11.0 / 192.0).epsilon(1e-12));
}

TEST_CASE("incomplete beta at z=1 is the complete beta") {
    const double expected = std::exp(std::lgamma(2.5) + std::lgamma(4.5) - std::lgamma(7.0));
    CHECK(incomplete_beta(1.0, 2.5, 4.5) == Catch::Approx(expected).epsilon(1e-13));
}

TEST_CASE("incomplete beta is monotone in z and zero at the origin") {
    std::mt19937 rng(91);
    std::uniform_real_distribution<double> ab(0.5, 40.0);
    for (int rep = 0; rep < 50; ++rep) {
        const double a = ab(rng), b = ab(rng);
        CHECK(incomplete_beta(0.0, a, b) == 0.0);
        double prev = 0.0;
        for (double z = 0.05; z <= 1.0; z += 0.05) {
            const double cur = incomplete_beta(z, a, b);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("incomplete beta agrees with adaptive quadrature") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> zs(0.01, 0.99), ab(0.5, 120.0);
    for (int rep = 0; rep < 200; ++rep) {
        const double z = zs(rng), a = ab(rng), b = ab(rng);
        const double expected = oracle::incomplete_beta_quadrature(z, a, b);
        CHECK(incomplete_beta(z, a, b) == Catch::Approx(expected).margin(1e-11));
    }
}

TEST_CASE("incomplete beta rejects domain violations") {
    CHECK_THROWS_AS(incomplete_beta(-0.1, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(incomplete_beta(1.1, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(incomplete_beta(0.5, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(incomplete_beta(0.5, 1.0, -2.0), std::invalid_argument);
}

TEST_CASE("log incomplete beta tracks the direct value where both exist") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> zs(0.01, 0.99), ab(0.5, 60.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double z = zs(rng), a = ab(rng), b = ab(rng);
        const double direct = incomplete_beta(z, a, b);
        if (direct <= 0.0) continue;
        CHECK(log_incomplete_beta(z, a, b) == Catch::Approx(std::log(direct)).margin(1e-9));
    }
}

TEST_CASE("log incomplete beta survives underflowing arguments") {
    // z^a alone is ~1e-320; the direct product would be zero
    const double v = log_incomplete_beta(1e-10, 32.0, 90.0);
    CHECK(std::isfinite(v));
    CHECK(v < -700.0);
}

TEST_CASE("normal cdf hits the standard anchors") {
    CHECK(normal_cdf(0.0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(normal_cdf(1.959963984540054) == Catch::Approx(0.975).margin(1e-12));
    CHECK(two_sided_normal_p(1.959963984540054) == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("chi-square survival matches quadrature of the density") {
    // k = 4, x = 7.779 -> sf close to 0.1 (textbook anchor)
    for (double dof : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        for (double x : {0.5, 2.0, 7.0, 20.0}) {
            const auto density = [dof](double t) {
                return std::exp((0.5 * dof - 1.0) * std::log(t) - 0.5 * t -
                                std::lgamma(0.5 * dof) - 0.5 * dof * std::log(2.0));
            };
            const double cdf = oracle::integrate(density, 1e-12, x);
            CHECK(chi_squared_sf(x, dof) == Catch::Approx(1.0 - cdf).margin(1e-9));
        }
    }
}
