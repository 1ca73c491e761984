// Rolling-window out-of-sample protocol: at every month t with a full
// M-month history, re-estimate, re-optimize, realize the next month's
// excess return, drift the held weights through the price moves and
// account for proportional transaction costs on the rebalancing trades.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "divbench/moments.hpp"
#include "divbench/panel.hpp"
#include "divbench/strategies.hpp"

namespace divbench {

struct BacktestConfig {
    Eigen::Index M = 240;        // estimation window, months
    double gamma = 1.0;          // risk aversion
    double tc = 0.005;           // proportional cost per transaction
    std::uint64_t seed = 0;      // universe subsampling seed
    Eigen::Index universe_cap = 60;
};

struct SkipEvent {
    int date = 0;  // month serial
    std::string reason;
};

struct StrategyPath {
    std::string strategy_id;
    std::vector<int> rebalance_dates;        // month serials, length T-M
    std::vector<VectorXd> target_weights;    // over the full panel asset index
    std::vector<VectorXd> drifted_weights;   // w_{t+} after the month's moves
    std::vector<double> gross_excess;        // w_t' R_{t+1}
    std::vector<double> net_excess;          // net of transaction costs
    std::vector<double> period_turnover;     // trade into the next target; last = 0
    double establishment_turnover = 0.0;     // |w|_1 of the first position
    std::vector<SkipEvent> skip_events;
    std::vector<double> wealth;              // net wealth, establishment cost included
    std::map<std::string, double> diagnostics;  // averages of per-date diagnostics
};

/// Weights after one month of price moves: w_i (1 + rf + excess_i),
/// renormalized by the portfolio gross return.
inline VectorXd drifted_weights(const VectorXd& w, const VectorXd& asset_excess, double rf) {
    if (w.size() != asset_excess.size())
        throw std::invalid_argument("drifted_weights: size mismatch");
    if (std::abs(w.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("drifted_weights: weights must sum to 1");
    const VectorXd gross = (1.0 + rf + asset_excess.array()).matrix();
    const VectorXd value = w.cwiseProduct(gross);
    const double total = value.sum();
    if (total <= 0.0)
        throw std::runtime_error("drifted_weights: portfolio gross return wiped out");
    return value / total;
}

/// L1 distance between the next target and the drifted holdings over the
/// union of their index sets (both vectors live on the full asset index,
/// so departures and entries contribute their whole weight).
inline double period_turnover(const VectorXd& w_next, const VectorXd& w_drift) {
    if (w_next.size() != w_drift.size())
        throw std::invalid_argument("period_turnover: size mismatch");
    return (w_next - w_drift).cwiseAbs().sum();
}

/// Wealth evolution net of proportional costs:
/// W_{t+1} = W_t (1 + R_{t+1})(1 - tc * turnover_{t+1}), W_0 = 1.
/// Returns the per-period net excess returns W_{t+1}/W_t - 1.
inline std::vector<double> net_wealth_path(const std::vector<double>& gross,
                                           const std::vector<double>& turnover, double tc) {
    if (tc < 0.0) throw std::invalid_argument("net_wealth_path: tc must be >= 0");
    if (gross.size() != turnover.size())
        throw std::invalid_argument("net_wealth_path: length mismatch");
    std::vector<double> net(gross.size());
    double wealth = 1.0;
    for (size_t j = 0; j < gross.size(); ++j) {
        const double w_next = wealth * (1.0 + gross[j]) * (1.0 - tc * turnover[j]);
        if (w_next <= 0.0)
            throw std::runtime_error("net_wealth_path: wealth wiped out at period " +
                                     std::to_string(j));
        net[j] = w_next / wealth - 1.0;
        wealth = w_next;
    }
    return net;
}

namespace detail {

// Previous target re-normalized over the surviving universe (the
// skip-with-carry policy for failed strategy evaluations).
inline VectorXd carry_weights(const VectorXd& prev, const std::vector<Eigen::Index>& universe,
                              Eigen::Index n_assets) {
    VectorXd carried = VectorXd::Zero(n_assets);
    if (prev.size() == 0) return carried;  // no position yet: stay out
    double total = 0.0;
    for (Eigen::Index i : universe) total += prev(i);
    if (total <= 1e-12) return carried;
    for (Eigen::Index i : universe) carried(i) = prev(i) / total;
    return carried;
}

}  // namespace detail

/// Run one strategy through the rolling-window protocol on one panel.
/// Strategy failures at a date fall back to carrying the previous target
/// (re-normalized over the surviving universe) and are logged.
inline StrategyPath run_backtest(const ReturnPanel& panel, const std::string& strategy_id,
                                 const StrategyParams& params, const BacktestConfig& config) {
    const Eigen::Index T = panel.months();
    const Eigen::Index N = panel.n_assets();
    const Eigen::Index M = config.M;
    if (M < 2) throw std::invalid_argument("run_backtest: M must be >= 2");
    if (T < M + 1)
        throw panel_error("run_backtest: panel spans " + std::to_string(T) +
                          " months, need at least M+1 = " + std::to_string(M + 1));
    if (!is_known_strategy(strategy_id))
        throw std::invalid_argument("run_backtest: unknown strategy '" + strategy_id + "'");

    StrategyPath path;
    path.strategy_id = strategy_id;
    const Eigen::Index n_periods = T - M;
    path.rebalance_dates.reserve(static_cast<size_t>(n_periods));

    std::map<std::string, double> diag_sums;
    std::map<std::string, double> diag_counts;
    VectorXd prev_target;  // empty until the first successful evaluation

    for (Eigen::Index j = 0; j < n_periods; ++j) {
        const Eigen::Index t = M - 1 + j;  // last month of the estimation window
        const int date = panel.dates[static_cast<size_t>(t)];
        path.rebalance_dates.push_back(date);

        UniverseSelection universe =
            select_universe(panel, date, M, config.universe_cap, config.seed);
        const Eigen::Index n_active = static_cast<Eigen::Index>(universe.active_assets.size());

        VectorXd target = VectorXd::Zero(N);
        bool skipped = false;
        try {
            MatrixXd window(M, n_active);
            for (Eigen::Index k = 0; k < n_active; ++k)
                window.col(k) =
                    panel.excess_returns.col(universe.active_assets[static_cast<size_t>(k)])
                        .segment(t - M + 1, M);
            const MomentEstimates est = sample_moments(window, date);

            MatrixXd factor_window;
            const MatrixXd* factor_ptr = nullptr;
            if (panel.factors.cols() > 0) {
                factor_window = panel.factors.middleRows(t - M + 1, M);
                if (factor_window.allFinite()) factor_ptr = &factor_window;
            }

            StrategyInput input{window, est, factor_ptr, config.gamma};
            const WeightVector w = compute_weights(strategy_id, params, input);
            for (Eigen::Index k = 0; k < n_active; ++k)
                target(universe.active_assets[static_cast<size_t>(k)]) = w.weights(k);
            for (const auto& [key, value] : w.diagnostics) {
                diag_sums[key] += value;
                diag_counts[key] += 1.0;
            }
        } catch (const std::exception& e) {
            skipped = true;
            path.skip_events.push_back({date, e.what()});
            target = detail::carry_weights(prev_target, universe.active_assets, N);
        }
        (void)skipped;
        prev_target = target;
        path.target_weights.push_back(target);

        // realize month t+1; unavailable returns of held assets earn the
        // risk-free rate, i.e. zero excess
        VectorXd next_excess = VectorXd::Zero(N);
        for (Eigen::Index i = 0; i < N; ++i)
            if (panel.available(t + 1, i)) next_excess(i) = panel.excess_returns(t + 1, i);
        path.gross_excess.push_back(target.dot(next_excess));

        const double rf = panel.has_risk_free ? panel.risk_free(t + 1) : 0.0;
        const double invested = target.cwiseAbs().sum();
        if (invested > 1e-12) {
            const VectorXd gross_per_asset = (1.0 + rf + next_excess.array()).matrix();
            const double total = target.dot(gross_per_asset);
            if (total <= 0.0)
                throw std::runtime_error("run_backtest: wealth wiped out at " +
                                         month_label(date));
            path.drifted_weights.push_back(target.cwiseProduct(gross_per_asset) / total);
        } else {
            path.drifted_weights.push_back(target);
        }
    }

    if (path.skip_events.size() == static_cast<size_t>(n_periods))
        throw std::runtime_error("run_backtest: every rebalance date was skipped (" +
                                 std::string(path.skip_events.front().reason) + ")");

    path.establishment_turnover = path.target_weights.front().cwiseAbs().sum();
    path.period_turnover.resize(static_cast<size_t>(n_periods), 0.0);
    for (Eigen::Index j = 0; j + 1 < n_periods; ++j)
        path.period_turnover[static_cast<size_t>(j)] =
            period_turnover(path.target_weights[static_cast<size_t>(j + 1)],
                            path.drifted_weights[static_cast<size_t>(j)]);

    path.net_excess = net_wealth_path(path.gross_excess, path.period_turnover, config.tc);

    // audited wealth includes the cost of establishing the first position
    path.wealth.resize(static_cast<size_t>(n_periods) + 1);
    path.wealth[0] = 1.0 * (1.0 - config.tc * path.establishment_turnover);
    for (Eigen::Index j = 0; j < n_periods; ++j)
        path.wealth[static_cast<size_t>(j) + 1] =
            path.wealth[static_cast<size_t>(j)] * (1.0 + path.net_excess[static_cast<size_t>(j)]);

    for (const auto& [key, total] : diag_sums)
        path.diagnostics["mean_" + key] = total / diag_counts[key];
    path.diagnostics["n_skips"] = static_cast<double>(path.skip_events.size());
    return path;
}

}  // namespace divbench
