// Evaluation metrics and significance tests: Sharpe ratio, certainty
// equivalent, the paired z-tests for differences in both, return-loss
// versus a benchmark, turnover summaries, per-asset data diagnostics and
// cross-strategy rankings.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "divbench/backtest.hpp"
#include "divbench/special.hpp"

namespace divbench {

struct PerfSummary {
    double mean = 0.0;
    double stdev = 0.0;
    double sharpe = 0.0;
    double ceq = 0.0;
    double avg_turnover = 0.0;
    Eigen::Index n_obs = 0;
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string method;
};

namespace detail {

inline double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// divisor n-1 throughout, consistent with the covariance estimator
inline double sample_variance(const std::vector<double>& x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double sample_covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace detail

/// Mean over standard deviation of an excess-return sequence.
inline double sharpe_ratio(const std::vector<double>& returns) {
    if (returns.size() < 2) throw std::invalid_argument("sharpe_ratio: need n >= 2");
    const double sd = std::sqrt(detail::sample_variance(returns));
    if (sd <= 0.0) throw std::invalid_argument("sharpe_ratio: zero variance");
    return detail::mean_of(returns) / sd;
}

/// Certainty-equivalent return mean - (gamma/2) * variance.
inline double ceq(const std::vector<double>& returns, double gamma) {
    if (returns.size() < 2) throw std::invalid_argument("ceq: need n >= 2");
    return detail::mean_of(returns) - 0.5 * gamma * detail::sample_variance(returns);
}

/// Two-sided z-test of equal Sharpe ratios of two strategies observed on
/// the same periods; asymptotically standard normal under iid normality.
inline TestResult sr_diff_test(const std::vector<double>& ri, const std::vector<double>& rj) {
    if (ri.size() != rj.size()) throw std::invalid_argument("sr_diff_test: length mismatch");
    const size_t n = ri.size();
    if (n < 3) throw std::invalid_argument("sr_diff_test: need n >= 3");

    const double mi = detail::mean_of(ri), mj = detail::mean_of(rj);
    const double vi = detail::sample_variance(ri), vj = detail::sample_variance(rj);
    const double si = std::sqrt(vi), sj = std::sqrt(vj);
    if (si <= 0.0 || sj <= 0.0)
        throw std::invalid_argument("sr_diff_test: degenerate variance");
    const double sij = detail::sample_covariance(ri, rj);

    const double theta = (2.0 * vi * vj - 2.0 * si * sj * sij + 0.5 * mi * mi * vj +
                          0.5 * mj * mj * vi - (mi * mj / (si * sj)) * sij * sij) /
                         static_cast<double>(n);
    TestResult out;
    out.method = "sr-z";
    if (theta <= 0.0) {
        out.statistic = 0.0;
        out.p_value = 1.0;
        return out;
    }
    out.statistic = (sj * mi - si * mj) / std::sqrt(theta);
    out.p_value = two_sided_normal_p(out.statistic);
    return out;
}

/// Two-sided delta-method z-test of equal certainty equivalents.
inline TestResult ceq_diff_test(const std::vector<double>& ri, const std::vector<double>& rj,
                                double gamma) {
    if (ri.size() != rj.size()) throw std::invalid_argument("ceq_diff_test: length mismatch");
    const size_t n = ri.size();
    if (n < 3) throw std::invalid_argument("ceq_diff_test: need n >= 3");

    const double mi = detail::mean_of(ri), mj = detail::mean_of(rj);
    const double vi = detail::sample_variance(ri), vj = detail::sample_variance(rj);
    const double sij = detail::sample_covariance(ri, rj);

    // gradient of f(v) = (mu_i - g/2 s_i^2) - (mu_j - g/2 s_j^2)
    const double grad[4] = {1.0, -1.0, -0.5 * gamma, 0.5 * gamma};
    const double theta_m[4][4] = {{vi, sij, 0.0, 0.0},
                                  {sij, vj, 0.0, 0.0},
                                  {0.0, 0.0, 2.0 * vi * vi, 2.0 * sij * sij},
                                  {0.0, 0.0, 2.0 * sij * sij, 2.0 * vj * vj}};
    double variance = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) variance += grad[a] * theta_m[a][b] * grad[b];
    variance /= static_cast<double>(n);

    TestResult out;
    out.method = "ceq-z";
    const double f = (mi - 0.5 * gamma * vi) - (mj - 0.5 * gamma * vj);
    if (variance <= 0.0) {
        if (std::abs(f) > 0.0)
            throw std::invalid_argument("ceq_diff_test: zero asymptotic variance");
        out.statistic = 0.0;
        out.p_value = 1.0;
        return out;
    }
    out.statistic = f / std::sqrt(variance);
    out.p_value = two_sided_normal_p(out.statistic);
    return out;
}

/// Extra mean return the candidate needs to match the benchmark's Sharpe
/// ratio, on net-of-cost returns: (mu_b/sigma_b) sigma_k - mu_k.
inline double return_loss(const std::vector<double>& candidate,
                          const std::vector<double>& benchmark) {
    if (candidate.size() != benchmark.size())
        throw std::invalid_argument("return_loss: length mismatch");
    if (candidate.size() < 2) throw std::invalid_argument("return_loss: need n >= 2");
    const double sb = std::sqrt(detail::sample_variance(benchmark));
    if (sb <= 0.0) throw std::invalid_argument("return_loss: degenerate benchmark");
    const double sk = std::sqrt(detail::sample_variance(candidate));
    return (detail::mean_of(benchmark) / sb) * sk - detail::mean_of(candidate);
}

/// Average percentage of wealth traded per period (the final period holds).
inline double avg_turnover(const StrategyPath& path) {
    if (path.period_turnover.empty())
        throw std::invalid_argument("avg_turnover: empty path");
    return detail::mean_of(path.period_turnover);
}

inline double relative_turnover(double strategy_avg, double benchmark_avg) {
    if (benchmark_avg <= 0.0)
        throw std::invalid_argument("relative_turnover: zero benchmark turnover");
    return strategy_avg / benchmark_avg;
}

inline PerfSummary summarize_performance(const StrategyPath& path, double gamma,
                                         bool net = false) {
    const std::vector<double>& r = net ? path.net_excess : path.gross_excess;
    PerfSummary s;
    s.n_obs = static_cast<Eigen::Index>(r.size());
    s.mean = detail::mean_of(r);
    s.stdev = std::sqrt(detail::sample_variance(r));
    s.sharpe = sharpe_ratio(r);
    s.ceq = ceq(r, gamma);
    s.avg_turnover = avg_turnover(path);
    return s;
}

// ---------------------------------------------------------------------------
// data diagnostics

struct AssetSummary {
    std::string asset;
    Eigen::Index n_obs = 0;
    double mean = 0.0;
    double stdev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

/// Per-asset summary of nominal (non-excess) monthly returns: the loader's
/// risk-free subtraction is undone for assets where it was applied.
/// Skewness and kurtosis are the moment estimators g1 and g2 (excess).
inline std::vector<AssetSummary> summary_statistics(const ReturnPanel& panel) {
    std::vector<AssetSummary> out;
    for (Eigen::Index i = 0; i < panel.n_assets(); ++i) {
        std::vector<double> x;
        for (Eigen::Index t = 0; t < panel.months(); ++t) {
            if (!panel.available(t, i)) continue;
            double v = panel.excess_returns(t, i);
            if (panel.rf_subtracted[static_cast<size_t>(i)]) v += panel.risk_free(t);
            x.push_back(v);
        }
        if (x.size() < 4)
            throw std::invalid_argument("summary_statistics: asset '" +
                                        panel.assets[static_cast<size_t>(i)] +
                                        "' has fewer than 4 observations");
        AssetSummary s;
        s.asset = panel.assets[static_cast<size_t>(i)];
        s.n_obs = static_cast<Eigen::Index>(x.size());
        const double n = static_cast<double>(x.size());
        s.mean = detail::mean_of(x);
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        s.min = x[0];
        s.max = x[0];
        for (double v : x) {
            const double d = v - s.mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        s.stdev = std::sqrt(m2 * n / (n - 1.0));
        if (m2 <= 0.0)
            throw std::invalid_argument("summary_statistics: constant series for asset '" +
                                        s.asset + "'");
        s.skewness = m3 / std::pow(m2, 1.5);
        s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
        out.push_back(std::move(s));
    }
    return out;
}

/// Ljung-Box portmanteau statistic Q = n(n+2) sum rho_k^2/(n-k) with a
/// chi-square(h) p-value.
inline TestResult ljung_box(const std::vector<double>& series, int lags) {
    const int n = static_cast<int>(series.size());
    if (lags < 1) throw std::invalid_argument("ljung_box: lags must be >= 1");
    if (n <= lags) throw std::invalid_argument("ljung_box: need n > lags");

    const double m = detail::mean_of(series);
    double denom = 0.0;
    for (double v : series) denom += (v - m) * (v - m);
    if (denom <= 0.0) throw std::invalid_argument("ljung_box: degenerate series");

    double q = 0.0;
    for (int k = 1; k <= lags; ++k) {
        double num = 0.0;
        for (int t = k; t < n; ++t) num += (series[t] - m) * (series[t - k] - m);
        const double rho = num / denom;
        q += rho * rho / static_cast<double>(n - k);
    }
    q *= static_cast<double>(n) * (static_cast<double>(n) + 2.0);

    TestResult out;
    out.method = "ljung-box";
    out.statistic = q;
    out.p_value = chi_squared_sf(q, static_cast<double>(lags));
    return out;
}

// ---------------------------------------------------------------------------
// rankings

/// Dense ranks per dataset column; higher is better unless ascending
/// (turnover). Ties share the better rank; equal values order by strategy
/// name only for output stability.
inline std::vector<std::vector<int>> rank_strategies(
    const std::vector<std::vector<double>>& metric, bool ascending = false) {
    std::vector<std::vector<int>> ranks(metric.size());
    if (metric.empty()) return ranks;
    const size_t n_datasets = metric.front().size();
    for (auto& row : ranks) row.assign(n_datasets, 0);

    for (size_t d = 0; d < n_datasets; ++d) {
        std::vector<std::pair<double, size_t>> column;
        for (size_t s = 0; s < metric.size(); ++s) {
            if (metric[s].size() != n_datasets)
                throw std::invalid_argument("rank_strategies: ragged metric table");
            column.emplace_back(metric[s][d], s);
        }
        std::sort(column.begin(), column.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return ascending ? a.first < b.first : a.first > b.first;
            return a.second < b.second;
        });
        int rank = 0;
        for (size_t k = 0; k < column.size(); ++k) {
            if (k == 0 || column[k].first != column[k - 1].first) ++rank;
            ranks[column[k].second][d] = rank;
        }
    }
    return ranks;
}

}  // namespace divbench
