// Independent oracles the tests check the library against. These stay
// deliberately naive: elimination instead of factorizations, quadrature
// instead of continued fractions, grid search instead of active sets.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Plain Gaussian elimination with partial pivoting.
inline VectorXd gaussian_solve(MatrixXd a, VectorXd b) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index col = 0; col < n; ++col) {
        Eigen::Index pivot = col;
        for (Eigen::Index r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (a(pivot, col) == 0.0) throw std::runtime_error("gaussian_solve: singular");
        a.row(col).swap(a.row(pivot));
        std::swap(b(col), b(pivot));
        for (Eigen::Index r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            a.row(r) -= f * a.row(col);
            b(r) -= f * b(col);
        }
    }
    VectorXd x(n);
    for (Eigen::Index r = n - 1; r >= 0; --r) {
        double s = b(r);
        for (Eigen::Index c = r + 1; c < n; ++c) s -= a(r, c) * x(c);
        x(r) = s / a(r, r);
    }
    return x;
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13, int depth = 60) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = detail::simpson(f, a, b, fa, fm, fb);
    return detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Incomplete beta by adaptive quadrature. The substitution y = u^2 removes
// the left-endpoint singularity for a in [0.5, 1).
inline double incomplete_beta_quadrature(double z, double a, double b) {
    if (z <= 0.0) return 0.0;
    const auto g = [a, b](double u) {
        if (u <= 0.0) return 0.0;
        const double y = u * u;
        if (y >= 1.0) return 0.0;
        return 2.0 * std::pow(u, 2.0 * a - 1.0) * std::pow(1.0 - y, b - 1.0);
    };
    return integrate(g, 0.0, std::sqrt(z));
}

// Exhaustive grid search of min 1/2 w'Pw + q'w over the unit simplex.
inline double simplex_grid_best_objective(const MatrixXd& p, const VectorXd& q, double step) {
    const Eigen::Index n = p.rows();
    if (n != 3) throw std::runtime_error("simplex_grid_best_objective: wired for N=3");
    double best = std::numeric_limits<double>::infinity();
    const int m = static_cast<int>(std::llround(1.0 / step));
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; i + j <= m; ++j) {
            VectorXd w(3);
            w << static_cast<double>(i) / m, static_cast<double>(j) / m,
                static_cast<double>(m - i - j) / m;
            best = std::min(best, 0.5 * w.dot(p * w) + q.dot(w));
        }
    }
    return best;
}

// Two-pass mean and covariance with divisor M-1.
inline void two_pass_moments(const MatrixXd& window, VectorXd& mean, MatrixXd& cov) {
    const Eigen::Index m = window.rows(), n = window.cols();
    mean = VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < m; ++t) mean += window.row(t).transpose();
    mean /= static_cast<double>(m);
    cov = MatrixXd::Zero(n, n);
    for (Eigen::Index t = 0; t < m; ++t) {
        const VectorXd d = window.row(t).transpose() - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(m - 1);
}

}  // namespace oracle
