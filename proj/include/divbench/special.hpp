// Scalar special functions used by the estimators and test statistics:
// the (non-regularized) incomplete beta function, the regularized
// incomplete gamma function backing chi-square tail probabilities, and
// the standard normal CDF.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace divbench {

namespace detail {

// Continued-fraction evaluation of the regularized incomplete beta
// (modified Lentz). Converges fast for z < (a+1)/(a+b+2).
inline double beta_cont_fraction(double z, double a, double b) {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;

    double c = 1.0;
    double d = 1.0 - qab * z / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;

    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * z / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;

        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("beta_cont_fraction: no convergence for a=" +
                             std::to_string(a) + " b=" + std::to_string(b));
}

}  // namespace detail

/// Regularized incomplete beta I_z(a,b) in [0,1].
inline double regularized_beta(double z, double a, double b) {
    if (!(z >= 0.0 && z <= 1.0))
        throw std::invalid_argument("regularized_beta: z outside [0,1]");
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("regularized_beta: a,b must be positive");
    if (z == 0.0) return 0.0;
    if (z == 1.0) return 1.0;

    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(z) + b * std::log1p(-z);
    const double front = std::exp(log_front);
    // Symmetry split keeps the continued fraction in its convergent region.
    if (z < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cont_fraction(z, a, b) / a;
    return 1.0 - front * detail::beta_cont_fraction(1.0 - z, b, a) / b;
}

/// Complete beta B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b).
inline double complete_beta(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

/// Non-regularized incomplete beta: integral of y^(a-1)(1-y)^(b-1) over [0,z].
inline double incomplete_beta(double z, double a, double b) {
    return regularized_beta(z, a, b) * complete_beta(a, b);
}

/// log of the non-regularized incomplete beta. Stays finite where the
/// direct value underflows (z^a below double range), which the adjusted
/// slope estimators hit for small squared slopes and long windows.
inline double log_incomplete_beta(double z, double a, double b) {
    if (!(z > 0.0 && z < 1.0))
        throw std::invalid_argument("log_incomplete_beta: z outside (0,1)");
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("log_incomplete_beta: a,b must be positive");
    if (z < (a + 1.0) / (a + b + 2.0))
        return a * std::log(z) + b * std::log1p(-z) +
               std::log(detail::beta_cont_fraction(z, a, b) / a);
    // B_z = B - B_{1-z}(b,a); the swapped tail is in the convergent region
    const double log_B = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double log_tail = b * std::log1p(-z) + a * std::log(z) +
                            std::log(detail::beta_cont_fraction(1.0 - z, b, a) / b);
    const double ratio = std::exp(log_tail - log_B);
    if (ratio >= 1.0) return -std::numeric_limits<double>::infinity();
    return log_B + std::log1p(-ratio);
}

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    constexpr int max_iter = 1000;
    constexpr double eps = 1e-16;
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < max_iter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * eps)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("gamma_p_series: no convergence");
}

// Regularized upper incomplete gamma Q(a,x) by continued fraction (x >= a+1).
inline double gamma_q_cont_fraction(double a, double x) {
    constexpr int max_iter = 1000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= max_iter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("gamma_q_cont_fraction: no convergence");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a,x).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("gamma_p: a must be positive");
    if (x < 0.0) throw std::invalid_argument("gamma_p: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cont_fraction(a, x);
}

/// Chi-square survival function with dof degrees of freedom.
inline double chi_squared_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return 1.0 - gamma_p(0.5 * dof, 0.5 * x);
}

/// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Two-sided p-value for an asymptotically standard normal statistic.
inline double two_sided_normal_p(double z) {
    if (!std::isfinite(z)) return std::numeric_limits<double>::quiet_NaN();
    return 2.0 * (1.0 - normal_cdf(std::abs(z)));
}

}  // namespace divbench
