#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "divbench/linalg.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace divbench;

TEST_CASE("solve_spd on the identity returns the rhs") {
    const MatrixXd s = MatrixXd::Identity(3, 3);
    VectorXd b(3);
    b << 1.0, 2.0, 3.0;
    CHECK((solve_spd(s, b) - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_spd on a diagonal matrix divides by the variances") {
    MatrixXd s = MatrixXd::Zero(2, 2);
    s.diagonal() << 4.0, 9.0;
    VectorXd b(2);
    b << 4.0, 9.0;
    const VectorXd x = solve_spd(s, b);
    CHECK(x(0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(x(1) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("solve_spd matches Gaussian elimination on seeded SPD systems") {
    std::mt19937 rng(42);
    for (int rep = 0; rep < 25; ++rep) {
        const MatrixXd s = testutil::random_spd(rng, 10);
        const VectorXd b = testutil::random_vector(rng, 10);
        double jitter = -1.0;
        const VectorXd x = solve_spd(s, b, &jitter);
        CHECK(jitter == 0.0);
        const VectorXd ref = oracle::gaussian_solve(s, b);
        CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((s * x - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("solve_spd jitters a rank-deficient matrix instead of failing") {
    MatrixXd s(2, 2);
    s << 1.0, 1.0, 1.0, 1.0;  // rank one
    VectorXd b(2);
    b << 2.0, 2.0;
    double jitter = 0.0;
    const VectorXd x = solve_spd(s, b, &jitter);
    CHECK(jitter > 0.0);
    CHECK((s * x - b).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("solve_spd reports truly singular inputs") {
    MatrixXd s = MatrixXd::Zero(2, 2);
    s << 1.0, 0.0, 0.0, -1.0;  // indefinite, not fixable by the jitter ladder
    VectorXd b(2);
    b << 1.0, 1.0;
    CHECK_THROWS_AS(solve_spd(s, b), singular_matrix_error);
}

TEST_CASE("solve_spd rejects non-symmetric input") {
    MatrixXd s(2, 2);
    s << 1.0, 0.5, -0.5, 1.0;
    VectorXd b = VectorXd::Ones(2);
    CHECK_THROWS_AS(solve_spd(s, b), std::invalid_argument);
}

TEST_CASE("ridge with alpha=0 interpolates exact linear data") {
    MatrixXd x(5, 1), y(5, 1);
    for (int i = 0; i < 5; ++i) {
        x(i, 0) = i;
        y(i, 0) = 2.0 * i;
    }
    const RidgeFit fit = ridge_regression(x, y, 0.0);
    CHECK(fit.coefficients(0, 0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(fit.intercepts(0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("huge alpha pushes coefficients to zero and intercepts to the mean") {
    std::mt19937 rng(5);
    const MatrixXd x = testutil::random_matrix(rng, 30, 3);
    const MatrixXd y = testutil::random_matrix(rng, 30, 2);
    const RidgeFit fit = ridge_regression(x, y, 1e12);
    CHECK(fit.coefficients.cwiseAbs().maxCoeff() < 1e-6);
    for (int j = 0; j < 2; ++j)
        CHECK(fit.intercepts(j) == Catch::Approx(y.col(j).mean()).margin(1e-6));
}

TEST_CASE("ridge matches the normal-equations oracle") {
    std::mt19937 rng(11);
    const MatrixXd x = testutil::random_matrix(rng, 40, 4);
    const MatrixXd y = testutil::random_matrix(rng, 40, 3);
    const double alpha = 1.0;

    const RidgeFit fit = ridge_regression(x, y, alpha);

    const VectorXd xm = x.colwise().mean();
    const VectorXd ym = y.colwise().mean();
    const MatrixXd xc = x.rowwise() - xm.transpose();
    const MatrixXd yc = y.rowwise() - ym.transpose();
    MatrixXd lhs = xc.transpose() * xc;
    lhs.diagonal().array() += alpha;
    for (int j = 0; j < 3; ++j) {
        const VectorXd beta = oracle::gaussian_solve(lhs, xc.transpose() * yc.col(j));
        CHECK((fit.coefficients.col(j) - beta).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(fit.intercepts(j) == Catch::Approx(ym(j) - xm.dot(beta)).margin(1e-8));
    }
}

TEST_CASE("ridge with alpha=0 equals ordinary least squares on full-rank data") {
    std::mt19937 rng(17);
    const MatrixXd x = testutil::random_matrix(rng, 50, 3);
    const MatrixXd y = testutil::random_matrix(rng, 50, 1);
    const RidgeFit fit = ridge_regression(x, y, 0.0);

    // OLS with explicit intercept column
    MatrixXd design(50, 4);
    design.col(0).setOnes();
    design.rightCols(3) = x;
    const VectorXd beta =
        oracle::gaussian_solve(design.transpose() * design, design.transpose() * y.col(0));
    CHECK(fit.intercepts(0) == Catch::Approx(beta(0)).margin(1e-8));
    for (int i = 0; i < 3; ++i)
        CHECK(fit.coefficients(i, 0) == Catch::Approx(beta(i + 1)).margin(1e-8));
}

TEST_CASE("ridge rejects bad input") {
    const MatrixXd x = MatrixXd::Zero(0, 2), y = MatrixXd::Zero(0, 1);
    CHECK_THROWS_AS(ridge_regression(x, y, 1.0), std::invalid_argument);
    MatrixXd x2 = MatrixXd::Ones(4, 2), y2 = MatrixXd::Ones(4, 1);
    x2(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ridge_regression(x2, y2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ridge_regression(MatrixXd::Ones(4, 2), y2, -0.5), std::invalid_argument);
}
