// The diversification rules: each maps one estimation window (plus
// parameters) to a vector of relative weights over the active assets.
//
// Unconstrained closed forms go through the jittered SPD solver; the
// short-sale and norm-constrained variants run through the active-set QP;
// the robust rules use a one-dimensional consistency search whose inner
// problem is a Markowitz solve with an effective risk aversion
// (gamma q + tau)/q^2 derived from the stationarity of the worst-case
// objective.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "divbench/linalg.hpp"
#include "divbench/moments.hpp"
#include "divbench/qp.hpp"

namespace divbench {

class strategy_error : public std::runtime_error {
public:
    explicit strategy_error(const std::string& what) : std::runtime_error(what) {}
};

struct StrategyParams {
    double gamma = 1.0;   // risk aversion
    double delta = 0.05;  // L1 radius for the norm-constrained rules
    double omega = 2.0;   // reward-to-risk timing aggressiveness, 1 or 2
    double tau = 4.0;     // model uncertainty aversion
    std::string inner = "mv";  // robust inner mean: mv | bs | mv-min
    bool constrained = false;
};

struct WeightVector {
    VectorXd weights;
    std::string strategy_id;
    StrategyParams params;
    std::map<std::string, double> diagnostics;
};

namespace detail {

inline void finalize_weights(WeightVector& w) {
    if (!w.weights.allFinite())
        throw strategy_error(w.strategy_id + ": non-finite weights");
    // the absolute-value normalizers may legitimately flip the sign of the
    // total; magnitude must still be a full budget
    if (std::abs(std::abs(w.weights.sum()) - 1.0) > 1e-8)
        throw strategy_error(w.strategy_id + ": weights do not sum to unit budget");
}

// x / |1'x| with the near-zero normalizer guard shared by the mixture rules.
inline VectorXd abs_normalize(const VectorXd& x, const std::string& id,
                              std::map<std::string, double>& diag) {
    const double total = x.sum();
    if (std::abs(total) < 1e-10)
        throw strategy_error(id + ": near-zero weight normalizer");
    diag["normalizer_sign"] = total > 0 ? 1.0 : -1.0;
    return x / std::abs(total);
}

struct SigmaOps {
    explicit SigmaOps(const MomentEstimates& est)
        : solver(est.sigma_hat),
          sinv_mu(solver.solve(est.mu_hat)),
          sinv_one(solver.solve(VectorXd::Ones(est.N))),
          one_sinv_one(VectorXd::Ones(est.N).dot(sinv_one)) {}
    SpdSolver solver;
    VectorXd sinv_mu;
    VectorXd sinv_one;
    double one_sinv_one;
};

}  // namespace detail

/// Equal weight on every available risky asset.
inline WeightVector weights_ew(Eigen::Index N) {
    if (N < 1) throw std::invalid_argument("weights_ew: need N >= 1");
    WeightVector w;
    w.strategy_id = "ew";
    w.weights = VectorXd::Constant(N, 1.0 / static_cast<double>(N));
    detail::finalize_weights(w);
    return w;
}

/// Tangency direction Sigma^-1 mu normalized to total one. An override
/// mean substitutes for the sample mean (Bayes-Stein, robust rules).
inline WeightVector weights_mv(const MomentEstimates& est, const VectorXd* mu_override = nullptr) {
    const VectorXd& mu = mu_override ? *mu_override : est.mu_hat;
    if (mu.size() != est.N) throw std::invalid_argument("weights_mv: mean size mismatch");

    WeightVector w;
    w.strategy_id = "mv";
    double jitter = 0.0;
    const VectorXd sinv_mu = solve_spd(est.sigma_hat, mu, &jitter);
    const double denom = sinv_mu.sum();
    if (std::abs(denom) < 1e-10)
        throw strategy_error("mv: tangency normalizer below 1e-10 (undefined direction)");
    w.weights = sinv_mu / denom;
    w.diagnostics["normalizer_sign"] = denom > 0 ? 1.0 : -1.0;
    w.diagnostics["jitter"] = jitter;
    detail::finalize_weights(w);
    return w;
}

/// Minimum-variance weights Sigma^-1 1 / (1' Sigma^-1 1).
inline WeightVector weights_min(const MomentEstimates& est) {
    WeightVector w;
    w.strategy_id = "min";
    double jitter = 0.0;
    const VectorXd sinv_one = solve_spd(est.sigma_hat, VectorXd::Ones(est.N), &jitter);
    w.weights = sinv_one / sinv_one.sum();
    w.diagnostics["jitter"] = jitter;
    detail::finalize_weights(w);
    return w;
}

/// Bayes-Stein: the shrunk mean inserted into the tangency rule.
inline WeightVector weights_bs(const MomentEstimates& est) {
    const WeightVector wmin = weights_min(est);
    const BayesSteinMean bs = bayes_stein_mean(est, wmin.weights);
    WeightVector w = weights_mv(est, &bs.mu_bs);
    w.strategy_id = "bs";
    w.diagnostics["phi"] = bs.phi;
    detail::finalize_weights(w);
    return w;
}

/// Short-sale-constrained minimum variance; anchor of the norm rules.
inline WeightVector weights_min_constrained(const MomentEstimates& est) {
    QuadraticProgram qp;
    qp.P = 2.0 * est.sigma_hat;
    qp.q = VectorXd::Zero(est.N);
    qp.equalities.emplace_back(VectorXd::Ones(est.N), 1.0);
    qp.lower_bounds = VectorXd::Zero(est.N);
    const SolverReport rep = solve_qp(qp);
    if (rep.status == SolverStatus::infeasible)
        throw strategy_error("min-c: infeasible constraint set");

    WeightVector w;
    w.strategy_id = "min-c";
    w.weights = rep.solution;
    w.diagnostics["qp_iterations"] = rep.iterations;
    w.diagnostics["jitter"] = rep.jitter_used;
    detail::finalize_weights(w);
    return w;
}

/// Conditional mean-variance with a VAR(1) forecast: minimize
/// w'Sigma w - (1/gamma) w'Rhat subject to the budget and an L1 ball of
/// radius delta around the short-sale-constrained minimum-variance anchor.
inline WeightVector weights_mv_var(const MatrixXd& window, const MomentEstimates& est,
                                   const StrategyParams& params) {
    if (params.delta < 0.0) throw std::invalid_argument("mv-var: delta must be >= 0");
    const VectorXd forecast = var1_forecast(window, 1.0);
    const WeightVector anchor = weights_min_constrained(est);

    QuadraticProgram qp;
    qp.P = 2.0 * est.sigma_hat;
    qp.q = -(1.0 / params.gamma) * forecast;
    qp.equalities.emplace_back(VectorXd::Ones(est.N), 1.0);
    qp.l1_anchor = L1Ball{anchor.weights, params.delta};
    const SolverReport rep = solve_qp(qp);
    if (rep.status == SolverStatus::infeasible)
        throw strategy_error("mv-var: infeasible norm constraint");

    WeightVector w;
    w.strategy_id = "mv-var";
    w.params = params;
    w.weights = rep.solution;
    w.diagnostics["qp_iterations"] = rep.iterations;
    w.diagnostics["jitter"] = rep.jitter_used;
    detail::finalize_weights(w);
    return w;
}

/// Reward-to-risk timing: long-only weights from (Sigma^-1 beta_bar^+)
/// raised elementwise to omega. Negative components are clamped to zero
/// before the power so omega = 2 cannot flip their sign.
inline WeightVector weights_rrt(const MomentEstimates& est, const FactorLoadings& loadings,
                                double omega) {
    if (loadings.beta_bar_plus.size() != est.N)
        throw std::invalid_argument("rrt: loadings size mismatch");
    if (loadings.beta_bar_plus.maxCoeff() <= 0.0)
        throw strategy_error("rrt: no asset with positive average beta");

    WeightVector w;
    w.strategy_id = "rrt";
    double jitter = 0.0;
    VectorXd v = solve_spd(est.sigma_hat, loadings.beta_bar_plus, &jitter);
    int clamped = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) < 0.0) {
            v(i) = 0.0;
            ++clamped;
        }
    v = v.array().pow(omega);
    const double total = v.sum();
    if (total <= 0.0) throw strategy_error("rrt: degenerate universe after clamping");
    w.weights = v / total;
    w.diagnostics["rrt_clamped"] = clamped;
    w.diagnostics["jitter"] = jitter;
    detail::finalize_weights(w);
    return w;
}

namespace detail {

// Markowitz solve min (gamma_eff/2) w'Sigma w - mu'w s.t. 1'w = 1.
inline VectorXd markowitz_budget(const SigmaOps& ops, const VectorXd& mu, double gamma_eff) {
    const VectorXd sinv_mu = ops.solver.solve(mu);
    const double eta = (VectorXd::Ones(mu.size()).dot(sinv_mu) - gamma_eff) / ops.one_sinv_one;
    return (sinv_mu - eta * ops.sinv_one) / gamma_eff;
}

// Same objective with the nonnegativity constraint, via the QP.
inline VectorXd markowitz_simplex(const MomentEstimates& est, const VectorXd& mu,
                                  double gamma_eff) {
    QuadraticProgram qp;
    qp.P = gamma_eff * est.sigma_hat;
    qp.q = -mu;
    qp.equalities.emplace_back(VectorXd::Ones(est.N), 1.0);
    qp.lower_bounds = VectorXd::Zero(est.N);
    const SolverReport rep = solve_qp(qp);
    if (rep.status == SolverStatus::infeasible)
        throw strategy_error("robust inner QP infeasible");
    return rep.solution;
}

// Inner mean for the robust rules.
inline VectorXd robust_inner_mean(const MomentEstimates& est, const std::string& inner,
                                  std::map<std::string, double>& diag) {
    if (inner == "mv") return est.mu_hat;
    if (inner == "bs") {
        const WeightVector wmin = weights_min(est);
        const BayesSteinMean bs = bayes_stein_mean(est, wmin.weights);
        diag["phi"] = bs.phi;
        return bs.mu_bs;
    }
    if (inner == "mv-min") {
        const KanZhouStats kz = kan_zhou_stats(est);
        diag["xi"] = kz.xi;
        return mv_min_expected_return(est, kz);
    }
    throw std::invalid_argument("weights_robust: unknown inner rule '" + inner + "'");
}

}  // namespace detail

/// Worst-case mean-variance rule. The stationary points of the robust
/// objective are Markowitz solutions with effective risk aversion
/// (gamma q + tau)/q^2; q is pinned by bisection on the consistency
/// condition q = 1 - gamma tau w'Sigma w. As tau -> 0 the rule converges
/// to the non-robust budget-constrained mean-variance solution.
inline WeightVector weights_robust(const MomentEstimates& est, const std::string& inner,
                                   const StrategyParams& params) {
    if (params.tau < 0.0) throw std::invalid_argument("weights_robust: tau must be >= 0");
    WeightVector w;
    w.strategy_id = params.constrained ? "ac-" + inner + "-c" : "ac-" + inner;
    w.params = params;

    const VectorXd mu_k = detail::robust_inner_mean(est, inner, w.diagnostics);
    const detail::SigmaOps ops(est);
    const double gamma = params.gamma;
    const double tau = std::max(params.tau, 1e-14);

    auto solve_at = [&](double q) -> VectorXd {
        const double gamma_eff = (gamma * q + tau) / (q * q);
        return params.constrained ? detail::markowitz_simplex(est, mu_k, gamma_eff)
                                  : detail::markowitz_budget(ops, mu_k, gamma_eff);
    };
    auto residual = [&](double q) {
        const VectorXd cand = solve_at(q);
        return q - (1.0 - gamma * tau * cand.dot(est.sigma_hat * cand));
    };

    double lo = 1e-12, hi = 1.0;
    const double r_lo = residual(lo);
    if (r_lo >= 0.0)
        throw strategy_error(w.strategy_id +
                             ": feasible region empty (gamma*tau*min-variance >= 1)");

    double q = hi, r = 0.0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        q = 0.5 * (lo + hi);
        r = residual(q);
        if (std::abs(r) <= 1e-10) {
            converged = true;
            break;
        }
        (r < 0.0 ? lo : hi) = q;
    }
    if (!converged) {
        // fine scan fallback: take the q with the smallest consistency gap
        double best_q = q, best_r = std::abs(r);
        for (double qq = 1e-5; qq < 1.0; qq += 1e-5) {
            const double rr = std::abs(residual(qq));
            if (rr < best_r) {
                best_r = rr;
                best_q = qq;
            }
        }
        q = best_q;
    }
    w.weights = solve_at(q);
    w.diagnostics["q"] = q;
    detail::finalize_weights(w);
    return w;
}

/// Three-fund rule: scaled mix of the sample tangency and minimum-variance
/// directions with weights driven by the adjusted squared slope.
inline WeightVector weights_mv_min(const MomentEstimates& est, const KanZhouStats& kz,
                                   double gamma) {
    WeightVector w;
    w.strategy_id = "mv-min";
    const detail::SigmaOps ops(est);
    const double n_over_m = static_cast<double>(est.N) / static_cast<double>(est.M);
    const double mix = kz.psi2_a + n_over_m;
    const VectorXd x = (kz.c_kz / gamma) *
                       ((kz.psi2_a / mix) * ops.sinv_mu +
                        (n_over_m / mix) * kz.mu_g * ops.sinv_one);
    w.weights = detail::abs_normalize(x, w.strategy_id, w.diagnostics);
    w.diagnostics["xi"] = kz.xi;
    detail::finalize_weights(w);
    return w;
}

/// Mixture of 1/N with the minimum-variance direction (no 1/gamma factor).
inline WeightVector weights_ew_min(const MomentEstimates& est, const KanZhouStats& kz) {
    WeightVector w;
    w.strategy_id = "ew-min";
    const detail::SigmaOps ops(est);
    const double n_over_m = static_cast<double>(est.N) / static_cast<double>(est.M);
    const double mix = kz.psi2_a + n_over_m;
    const VectorXd ones_over_n =
        VectorXd::Constant(est.N, 1.0 / static_cast<double>(est.N));
    const VectorXd x = kz.c_kz * ((kz.psi2_a / mix) * ones_over_n +
                                  (n_over_m / mix) * kz.mu_g * ops.sinv_one);
    w.weights = detail::abs_normalize(x, w.strategy_id, w.diagnostics);
    detail::finalize_weights(w);
    return w;
}

/// Mixture of 1/N with the sample tangency portfolio; the combination
/// weight lambda = pi1/(pi1+pi2) is clamped to [0,1].
inline WeightVector weights_ew_mv(const MomentEstimates& est, const KanZhouStats& kz,
                                  double gamma) {
    WeightVector w;
    w.strategy_id = "ew-mv";
    const detail::SigmaOps ops(est);
    const double M = static_cast<double>(est.M), N = static_cast<double>(est.N);
    const VectorXd w_ew = VectorXd::Constant(est.N, 1.0 / N);
    const double g2 = gamma * gamma;

    const double pi1 = w_ew.dot(est.sigma_hat * w_ew) - (2.0 / gamma) * w_ew.dot(est.mu_hat) +
                       kz.theta2_a / g2;
    const double pi2 = (kz.h1 - 1.0) * kz.theta2_a / g2 + kz.h1 * N / (g2 * M);
    if (pi1 + pi2 <= 0.0)
        throw strategy_error("ew-mv: degenerate combination (pi1 + pi2 <= 0)");
    const double lambda = std::min(1.0, std::max(0.0, pi1 / (pi1 + pi2)));

    const VectorXd x = (1.0 - lambda) * w_ew + (lambda / gamma) * ops.sinv_mu;
    w.weights = detail::abs_normalize(x, w.strategy_id, w.diagnostics);
    w.diagnostics["lambda"] = lambda;
    detail::finalize_weights(w);
    return w;
}

/// Mixture of 1/N with the three-fund rule.
inline WeightVector weights_ew_mv_min(const MomentEstimates& est, const KanZhouStats& kz,
                                      double gamma) {
    WeightVector w;
    w.strategy_id = "ew-mv-min";
    const detail::SigmaOps ops(est);
    const double M = static_cast<double>(est.M), N = static_cast<double>(est.N);
    const VectorXd w_ew = VectorXd::Constant(est.N, 1.0 / N);
    const double g2 = gamma * gamma;

    const double pi1 = w_ew.dot(est.sigma_hat * w_ew) - (2.0 / gamma) * w_ew.dot(est.mu_hat) +
                       kz.theta2_a / g2;
    const double ew_mu = w_ew.dot(est.mu_hat);
    const double mu_sinv_mu = est.mu_hat.dot(ops.sinv_mu);
    const double mu_sinv_one = est.mu_hat.dot(ops.sinv_one);
    const double pi13 =
        kz.theta2_a / g2 - ew_mu / gamma +
        (1.0 / (gamma * kz.h1)) *
            ((kz.psi2_a * ew_mu + (1.0 - kz.psi2_a) * kz.mu_g * w_ew.sum()) -
             (1.0 / gamma) * (kz.psi2_a * mu_sinv_mu + (1.0 - kz.psi2_a) * kz.mu_g * mu_sinv_one));
    const double pi3 = kz.theta2_a / g2 - (kz.theta2_a - (N / M) * kz.psi2_a) / (g2 * kz.h1);

    const double denom = pi1 - 2.0 * pi13 + pi3;
    if (std::abs(denom) < 1e-300)
        throw strategy_error("ew-mv-min: zero combination denominator");
    const double lambda = std::min(1.0, std::max(0.0, (pi1 - pi13) / denom));

    const double n_over_m = N / M;
    const double mix = kz.psi2_a + n_over_m;
    const VectorXd x_three = (kz.c_kz / gamma) *
                             ((kz.psi2_a / mix) * ops.sinv_mu +
                              (n_over_m / mix) * kz.mu_g * ops.sinv_one);
    const VectorXd x = (1.0 - lambda) * w_ew + lambda * x_three;
    w.weights = detail::abs_normalize(x, w.strategy_id, w.diagnostics);
    w.diagnostics["lambda"] = lambda;
    detail::finalize_weights(w);
    return w;
}

/// Short-sale-constrained variants: the base rule's objective under
/// 1'w = 1 and w >= 0.
inline WeightVector weights_constrained(const std::string& base, const MomentEstimates& est,
                                        const StrategyParams& params) {
    if (base == "min") return weights_min_constrained(est);
    if (base == "ac-mv" || base == "ac-bs" || base == "ac-mv-min") {
        StrategyParams p = params;
        p.constrained = true;
        return weights_robust(est, base.substr(3), p);
    }

    WeightVector w;
    w.strategy_id = base + "-c";
    w.params = params;
    VectorXd mu;
    if (base == "mv") {
        mu = est.mu_hat;
    } else if (base == "bs") {
        const WeightVector wmin = weights_min(est);
        const BayesSteinMean bs = bayes_stein_mean(est, wmin.weights);
        w.diagnostics["phi"] = bs.phi;
        mu = bs.mu_bs;
    } else {
        throw std::invalid_argument("weights_constrained: unknown base '" + base + "'");
    }

    QuadraticProgram qp;
    qp.P = params.gamma * est.sigma_hat;
    qp.q = -mu;
    qp.equalities.emplace_back(VectorXd::Ones(est.N), 1.0);
    qp.lower_bounds = VectorXd::Zero(est.N);
    const SolverReport rep = solve_qp(qp);
    if (rep.status == SolverStatus::infeasible)
        throw strategy_error(w.strategy_id + ": infeasible constraint set");
    w.weights = rep.solution;
    w.diagnostics["qp_iterations"] = rep.iterations;
    w.diagnostics["jitter"] = rep.jitter_used;
    detail::finalize_weights(w);
    return w;
}

/// Norm-constrained variants: the base objective under the budget and an
/// L1 ball around the short-sale-constrained minimum-variance weights.
inline WeightVector weights_norm_constrained(const std::string& base,
                                             const MomentEstimates& est,
                                             const StrategyParams& params) {
    if (params.delta < 0.0)
        throw std::invalid_argument("weights_norm_constrained: delta must be >= 0");
    const WeightVector anchor = weights_min_constrained(est);

    WeightVector w;
    w.params = params;
    QuadraticProgram qp;
    if (base == "min") {
        w.strategy_id = "min-norm";
        qp.P = 2.0 * est.sigma_hat;
        qp.q = VectorXd::Zero(est.N);
    } else if (base == "bs") {
        w.strategy_id = "bs-norm";
        const WeightVector wmin = weights_min(est);
        const BayesSteinMean bs = bayes_stein_mean(est, wmin.weights);
        w.diagnostics["phi"] = bs.phi;
        qp.P = params.gamma * est.sigma_hat;
        qp.q = -bs.mu_bs;
    } else {
        throw std::invalid_argument("weights_norm_constrained: unknown base '" + base + "'");
    }
    qp.equalities.emplace_back(VectorXd::Ones(est.N), 1.0);
    qp.l1_anchor = L1Ball{anchor.weights, params.delta};
    const SolverReport rep = solve_qp(qp);
    if (rep.status == SolverStatus::infeasible)
        throw strategy_error(w.strategy_id + ": infeasible norm constraint");
    w.weights = rep.solution;
    w.diagnostics["qp_iterations"] = rep.iterations;
    w.diagnostics["jitter"] = rep.jitter_used;
    detail::finalize_weights(w);
    return w;
}

/// Hypothetical in-sample benchmark: the tangency rule on moments of the
/// entire sample (M = T).
inline WeightVector weights_mv_insample(const MomentEstimates& full_panel_moments) {
    WeightVector w = weights_mv(full_panel_moments);
    w.strategy_id = "mv-insample";
    return w;
}

// ---------------------------------------------------------------------------
// dispatch

struct StrategyInput {
    const MatrixXd& window;             // M x n excess returns of the active assets
    const MomentEstimates& moments;
    const MatrixXd* factor_window = nullptr;  // M x K, required by rrt
    double gamma = 1.0;
};

/// Stable strategy identifiers in the reporting order.
inline const std::vector<std::string>& strategy_ids() {
    static const std::vector<std::string> ids = {
        "ew",      "mv",        "bs",        "mv-var", "min",     "rrt",
        "ac-mv",   "ac-bs",     "ac-mv-min", "mv-min", "ew-min",  "ew-mv",
        "ew-mv-min", "mv-c",    "min-c",     "bs-c",   "ac-mv-c", "ac-bs-c",
        "ac-mv-min-c", "min-norm", "bs-norm"};
    return ids;
}

inline bool is_known_strategy(const std::string& id) {
    const auto& ids = strategy_ids();
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

/// Evaluate one strategy on one estimation window.
inline WeightVector compute_weights(const std::string& id, const StrategyParams& params,
                                    const StrategyInput& in) {
    const MomentEstimates& est = in.moments;
    StrategyParams p = params;
    p.gamma = in.gamma;

    if (id == "ew") return weights_ew(est.N);
    if (id == "mv") return weights_mv(est);
    if (id == "bs") return weights_bs(est);
    if (id == "min") return weights_min(est);
    if (id == "mv-var") return weights_mv_var(in.window, est, p);
    if (id == "rrt") {
        if (!in.factor_window)
            throw std::invalid_argument("rrt: dataset provides no factor columns");
        const FactorLoadings loadings = factor_betas(in.window, *in.factor_window);
        return weights_rrt(est, loadings, p.omega);
    }
    if (id == "ac-mv" || id == "ac-bs" || id == "ac-mv-min")
        return weights_robust(est, id.substr(3), p);
    if (id == "mv-min") return weights_mv_min(est, kan_zhou_stats(est), p.gamma);
    if (id == "ew-min") return weights_ew_min(est, kan_zhou_stats(est));
    if (id == "ew-mv") return weights_ew_mv(est, kan_zhou_stats(est), p.gamma);
    if (id == "ew-mv-min") return weights_ew_mv_min(est, kan_zhou_stats(est), p.gamma);
    if (id == "mv-c" || id == "bs-c" || id == "min-c")
        return weights_constrained(id.substr(0, id.size() - 2), est, p);
    if (id == "ac-mv-c" || id == "ac-bs-c" || id == "ac-mv-min-c")
        return weights_constrained(id.substr(0, id.size() - 2), est, p);
    if (id == "min-norm" || id == "bs-norm")
        return weights_norm_constrained(id.substr(0, id.find('-')), est, p);
    throw std::invalid_argument("compute_weights: unknown strategy '" + id + "'");
}

}  // namespace divbench
