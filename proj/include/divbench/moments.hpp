// Statistical inputs the strategies consume from one estimation window:
// sample moments, the Bayes-Stein shrunk mean, the Kan-Zhou scalar
// statistics behind the three-fund and mixture rules, one-step VAR(1)
// forecasts and factor loadings.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "divbench/linalg.hpp"
#include "divbench/special.hpp"

namespace divbench {

struct MomentEstimates {
    VectorXd mu_hat;    // monthly expected excess return
    MatrixXd sigma_hat; // monthly covariance, divisor M-1
    Eigen::Index M = 0; // window length
    Eigen::Index N = 0; // asset count
    int window_end = 0; // month serial, informational
};

/// Column means and covariance (divisor M-1) of one estimation window.
inline MomentEstimates sample_moments(const MatrixXd& window, int window_end = 0) {
    const Eigen::Index M = window.rows(), N = window.cols();
    if (M < 2) throw std::invalid_argument("sample_moments: need at least 2 observations");
    if (!window.allFinite())
        throw std::invalid_argument("sample_moments: non-finite entries in window");

    MomentEstimates est;
    est.M = M;
    est.N = N;
    est.window_end = window_end;
    est.mu_hat = window.colwise().mean();
    const MatrixXd centered = window.rowwise() - est.mu_hat.transpose();
    est.sigma_hat = centered.transpose() * centered / static_cast<double>(M - 1);
    // round symmetry to the bit
    est.sigma_hat = ((est.sigma_hat + est.sigma_hat.transpose()) / 2.0).eval();
    return est;
}

struct BayesSteinMean {
    VectorXd mu_bs;
    double phi = 0.0;      // shrinkage intensity, clamped to [0,1]
    double mu_min = 0.0;   // grand mean: expected return of the min-variance portfolio
};

/// Shrink the sample mean toward the grand mean mu_min = mu'w_min with
/// intensity phi = (N+2) / ((N+2) + M (mu-mu_min 1)' Sigma^-1 (mu-mu_min 1)).
inline BayesSteinMean bayes_stein_mean(const MomentEstimates& est, const VectorXd& w_min) {
    if (w_min.size() != est.N) throw std::invalid_argument("bayes_stein_mean: size mismatch");
    if (std::abs(w_min.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("bayes_stein_mean: w_min must sum to 1");

    BayesSteinMean out;
    out.mu_min = est.mu_hat.dot(w_min);
    const VectorXd diff = est.mu_hat.array() - out.mu_min;
    const double quad = diff.dot(solve_spd(est.sigma_hat, diff));
    const double n2 = static_cast<double>(est.N) + 2.0;
    double phi = n2 / (n2 + static_cast<double>(est.M) * quad);
    phi = std::min(1.0, std::max(0.0, phi));
    out.phi = phi;
    out.mu_bs = (1.0 - phi) * est.mu_hat.array() + phi * out.mu_min;
    return out;
}

struct KanZhouStats {
    double psi2 = 0.0;     // squared slope distance of mu from the grand mean
    double psi2_a = 0.0;   // its adjusted (unbiased-style) version, floored
    double theta2 = 0.0;   // mu' Sigma^-1 mu
    double theta2_a = 0.0; // adjusted version, floored
    double mu_g = 0.0;     // expected return of the global min-variance portfolio
    double c_kz = 0.0;     // (M-N-1)(M-N-4) / (M(M-2))
    double h1 = 0.0;       // (M-2)(M-N-2) / ((M-N-1)(M-N-4))
    double xi = 0.0;       // N / (M psi2_a + N)
    bool psi2_a_floored = false;
    bool theta2_a_floored = false;
};

namespace detail {

// Adjusted squared-slope estimate shared by psi_a^2 and theta_a^2:
//   (lead * s2 - sub)/M + 2 s2^(a) (1+s2)^(-(M-2)/2) / (M B_z(a, b))
// with z = s2/(1+s2). Both printed variants use the negative exponent;
// small-sample negatives are floored at 1e-12.
inline double adjusted_slope(double s2, double lead, double sub, double a, double b,
                             double M, bool* floored) {
    constexpr double kFloor = 1e-12;
    double value;
    if (s2 <= 0.0 || a <= 0.0) {
        value = -sub / M;  // degenerate: correction term vanishes with s2 -> 0
    } else {
        const double z = s2 / (1.0 + s2);
        const double log_num = std::log(2.0) + a * std::log(s2) -
                               0.5 * (M - 2.0) * std::log1p(s2);
        const double log_den = std::log(M) + log_incomplete_beta(z, a, b);
        value = (lead * s2 - sub) / M + std::exp(log_num - log_den);
    }
    if (value < kFloor) {
        if (floored) *floored = true;
        return kFloor;
    }
    return value;
}

}  // namespace detail

/// The eight scalar statistics feeding the three-fund and mixture rules.
inline KanZhouStats kan_zhou_stats(const MomentEstimates& est) {
    const double M = static_cast<double>(est.M);
    const double N = static_cast<double>(est.N);
    if (!(est.M > est.N + 4))
        throw std::invalid_argument("kan_zhou_stats: window too short, need M > N + 4 (M=" +
                                    std::to_string(est.M) + ", N=" + std::to_string(est.N) + ")");

    KanZhouStats kz;
    SpdSolver sigma(est.sigma_hat);
    const VectorXd sinv_mu = sigma.solve(est.mu_hat);
    const VectorXd sinv_one = sigma.solve(VectorXd::Ones(est.N));
    const double one_sinv_one = VectorXd::Ones(est.N).dot(sinv_one);

    kz.mu_g = est.mu_hat.dot(sinv_one) / one_sinv_one;
    const VectorXd diff = est.mu_hat.array() - kz.mu_g;
    kz.psi2 = std::max(0.0, diff.dot(sigma.solve(diff)));
    kz.theta2 = std::max(0.0, est.mu_hat.dot(sinv_mu));

    kz.c_kz = (M - N - 1.0) * (M - N - 4.0) / (M * (M - 2.0));
    kz.h1 = (M - 2.0) * (M - N - 2.0) / ((M - N - 1.0) * (M - N - 4.0));

    kz.psi2_a = detail::adjusted_slope(kz.psi2, M - N - 1.0, N - 1.0, (N - 1.0) / 2.0,
                                       (M - N + 1.0) / 2.0, M, &kz.psi2_a_floored);
    kz.theta2_a = detail::adjusted_slope(kz.theta2, M - N - 2.0, N, N / 2.0,
                                         (M - N) / 2.0, M, &kz.theta2_a_floored);

    kz.xi = N / (M * kz.psi2_a + N);
    return kz;
}

/// Expected return of the three-fund rule: (1-xi) mu + xi mu_g.
inline VectorXd mv_min_expected_return(const MomentEstimates& est, const KanZhouStats& kz) {
    return (1.0 - kz.xi) * est.mu_hat.array() + kz.xi * kz.mu_g;
}

/// One-step return forecast from R_{t+1} = A + B R_t fitted by ridge
/// regression on the lagged pairs inside the window.
inline VectorXd var1_forecast(const MatrixXd& window, double alpha) {
    const Eigen::Index M = window.rows();
    if (M < 3) throw std::invalid_argument("var1_forecast: need at least 3 observations");
    const MatrixXd X = window.topRows(M - 1);
    const MatrixXd Y = window.bottomRows(M - 1);
    const RidgeFit fit = ridge_regression(X, Y, alpha);
    return fit.intercepts + fit.coefficients.transpose() * window.row(M - 1).transpose();
}

struct FactorLoadings {
    MatrixXd betas;          // assets x factors
    VectorXd beta_bar_plus;  // max(0, row mean of betas)
};

/// Per-asset OLS of excess returns on factor excess returns with an
/// intercept; the averaged loading is clamped at zero.
inline FactorLoadings factor_betas(const MatrixXd& asset_window, const MatrixXd& factor_window) {
    if (asset_window.rows() != factor_window.rows())
        throw std::invalid_argument("factor_betas: window length mismatch");
    if (factor_window.cols() < 1)
        throw std::invalid_argument("factor_betas: need at least one factor");

    const RidgeFit fit = ridge_regression(factor_window, asset_window, 0.0);
    FactorLoadings out;
    out.betas = fit.coefficients.transpose();  // assets x factors
    out.beta_bar_plus = out.betas.rowwise().mean().cwiseMax(0.0);
    return out;
}

}  // namespace divbench
