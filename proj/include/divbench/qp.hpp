// Convex quadratic programming for the constrained portfolio rules.
//
// Primal active-set solver for
//     min 1/2 w'Pw + q'w
//     s.t. a_i'w = b_i           (equalities, e.g. the budget 1'w = 1)
//          w >= lb               (optional per-variable lower bounds)
//          ||w - anchor||_1 <= delta   (optional L1 ball)
//
// The L1 ball is reduced to linear constraints by the variable split
// w = anchor + u - v with u,v >= 0 and 1'(u+v) <= delta. Pivoting is
// deterministic: blocking constraints enter by lowest row index among
// minimal-ratio ties, and the most negative multiplier leaves (ties again
// by lowest index), so identical inputs reproduce identical paths.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "divbench/linalg.hpp"

namespace divbench {

struct L1Ball {
    VectorXd anchor;
    double radius = 0.0;
};

struct QuadraticProgram {
    MatrixXd P;  // symmetric quadratic cost
    VectorXd q;  // linear cost
    std::vector<std::pair<VectorXd, double>> equalities;
    std::optional<VectorXd> lower_bounds;
    std::optional<L1Ball> l1_anchor;
};

enum class SolverStatus { optimal, max_iter, infeasible };

struct SolverReport {
    VectorXd solution;
    double objective = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    SolverStatus status = SolverStatus::max_iter;
    double jitter_used = 0.0;
};

namespace detail {

// Expanded problem over z = (w) or z = (w,u,v) with rows
//   Aeq z = beq,  Cin z <= din.
struct WorkingProblem {
    MatrixXd G;
    VectorXd g;
    MatrixXd Aeq;
    VectorXd beq;
    MatrixXd Cin;
    VectorXd din;
    Eigen::Index n_orig = 0;
};

inline void append_row(MatrixXd& A, VectorXd& b, const VectorXd& row, double rhs) {
    A.conservativeResize(A.rows() + 1, row.size());
    A.row(A.rows() - 1) = row.transpose();
    b.conservativeResize(b.size() + 1);
    b(b.size() - 1) = rhs;
}

// Escalating diagonal loading until the Cholesky factorization holds.
inline double make_positive_definite(MatrixXd& P) {
    const Eigen::Index n = P.rows();
    const double scale = n > 0 ? std::max(P.trace() / static_cast<double>(n), 1e-300) : 1.0;
    static constexpr double kJitters[] = {0.0, 1e-12, 1e-10, 1e-8};
    for (double eps : kJitters) {
        MatrixXd loaded = P;
        loaded.diagonal().array() += eps * scale;
        Eigen::LLT<MatrixXd> llt(loaded);
        if (llt.info() == Eigen::Success) {
            bool ok = true;
            for (Eigen::Index i = 0; i < n; ++i)
                if (!(llt.matrixLLT()(i, i) > 1e-14 * std::sqrt(scale))) ok = false;
            if (ok) {
                P = loaded;
                return eps;
            }
        }
    }
    throw singular_matrix_error("solve_qp: quadratic cost singular after max jitter");
}

inline WorkingProblem expand_problem(const QuadraticProgram& qp, double* jitter) {
    const Eigen::Index n = qp.P.rows();
    if (qp.P.cols() != n || qp.q.size() != n)
        throw std::invalid_argument("solve_qp: inconsistent P/q sizes");
    if ((qp.P - qp.P.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, qp.P.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("solve_qp: P not symmetric");
    if (qp.l1_anchor && qp.l1_anchor->radius < 0.0)
        throw std::invalid_argument("solve_qp: negative L1 radius");
    if (qp.l1_anchor && qp.l1_anchor->anchor.size() != n)
        throw std::invalid_argument("solve_qp: anchor size mismatch");

    const bool split = qp.l1_anchor.has_value();
    const Eigen::Index nz = split ? 3 * n : n;

    WorkingProblem wp;
    wp.n_orig = n;
    wp.G = MatrixXd::Zero(nz, nz);
    wp.G.topLeftCorner(n, n) = qp.P;
    *jitter = make_positive_definite(wp.G);
    if (split) {
        // The (u,v) block carries no cost of its own; a tiny ridge removes
        // the zero-curvature ray u_i,v_i -> u_i+t,v_i+t.
        const double ridge = 1e-10 * (1.0 + qp.P.trace() / static_cast<double>(n));
        wp.G.bottomRightCorner(2 * n, 2 * n).diagonal().array() += ridge;
    }
    wp.g = VectorXd::Zero(nz);
    wp.g.head(n) = qp.q;

    wp.Aeq.resize(0, nz);
    wp.beq.resize(0);
    for (const auto& [a, b] : qp.equalities) {
        if (a.size() != n) throw std::invalid_argument("solve_qp: equality size mismatch");
        VectorXd row = VectorXd::Zero(nz);
        row.head(n) = a;
        append_row(wp.Aeq, wp.beq, row, b);
    }
    if (split) {
        // w - u + v = anchor, one row per variable
        for (Eigen::Index i = 0; i < n; ++i) {
            VectorXd row = VectorXd::Zero(nz);
            row(i) = 1.0;
            row(n + i) = -1.0;
            row(2 * n + i) = 1.0;
            append_row(wp.Aeq, wp.beq, row, qp.l1_anchor->anchor(i));
        }
    }

    wp.Cin.resize(0, nz);
    wp.din.resize(0);
    if (qp.lower_bounds) {
        if (qp.lower_bounds->size() != n)
            throw std::invalid_argument("solve_qp: bounds size mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lb = (*qp.lower_bounds)(i);
            if (!std::isfinite(lb)) continue;
            VectorXd row = VectorXd::Zero(nz);
            row(i) = -1.0;  // -w_i <= -lb
            append_row(wp.Cin, wp.din, row, -lb);
        }
    }
    if (split) {
        for (Eigen::Index i = 0; i < 2 * n; ++i) {  // u,v >= 0
            VectorXd row = VectorXd::Zero(nz);
            row(n + i) = -1.0;
            append_row(wp.Cin, wp.din, row, 0.0);
        }
        VectorXd row = VectorXd::Zero(nz);  // 1'(u+v) <= delta
        row.segment(n, 2 * n).setOnes();
        append_row(wp.Cin, wp.din, row, qp.l1_anchor->radius);
    }
    return wp;
}

// Feasible start constructed from the constraint structure. Returns
// nullopt when a certificate of infeasibility is found.
inline std::optional<VectorXd> feasible_start(const QuadraticProgram& qp,
                                              const WorkingProblem& wp) {
    const Eigen::Index n = wp.n_orig;
    const Eigen::Index nz = wp.G.rows();
    constexpr double feas_tol = 1e-9;

    if (qp.l1_anchor) {
        // Shift the anchor uniformly onto each violated equality; total L1
        // movement must fit in the radius.
        VectorXd w = qp.l1_anchor->anchor;
        double l1_spent = 0.0;
        for (const auto& [a, b] : qp.equalities) {
            const double resid = b - a.dot(w);
            if (std::abs(resid) < feas_tol) continue;
            const double amax = a.cwiseAbs().maxCoeff();
            if (amax <= 0.0) return std::nullopt;
            // distribute along the largest coefficients of a
            VectorXd dir = VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i)
                if (std::abs(a(i)) > 0.5 * amax) dir(i) = a(i) > 0 ? 1.0 : -1.0;
            const double denom = a.dot(dir);
            if (std::abs(denom) < 1e-14) return std::nullopt;
            w += (resid / denom) * dir;
            l1_spent += std::abs(resid / denom) * dir.cwiseAbs().sum();
        }
        if (l1_spent > qp.l1_anchor->radius + feas_tol) return std::nullopt;
        if (qp.lower_bounds)
            for (Eigen::Index i = 0; i < n; ++i)
                if (w(i) < (*qp.lower_bounds)(i) - feas_tol) return std::nullopt;
        VectorXd z = VectorXd::Zero(nz);
        z.head(n) = w;
        const VectorXd diff = w - qp.l1_anchor->anchor;
        z.segment(n, n) = diff.cwiseMax(0.0);
        z.segment(2 * n, n) = (-diff).cwiseMax(0.0);
        return z;
    }

    if (qp.lower_bounds && qp.equalities.size() == 1 &&
        (qp.equalities[0].first.array() == 1.0).all()) {
        // budget + bounds: spread the remaining budget evenly
        VectorXd lb = qp.lower_bounds->cwiseMax(-1e30);
        const double room = qp.equalities[0].second - lb.sum();
        if (room < -feas_tol) return std::nullopt;
        VectorXd z = lb.array() + room / static_cast<double>(n);
        return z;
    }

    // equalities only (or none): minimum-norm solution
    VectorXd z = VectorXd::Zero(nz);
    if (wp.Aeq.rows() > 0) {
        z = wp.Aeq.transpose() *
            (wp.Aeq * wp.Aeq.transpose()).ldlt().solve(wp.beq).eval();
        if ((wp.Aeq * z - wp.beq).cwiseAbs().maxCoeff() > feas_tol) return std::nullopt;
    }
    for (Eigen::Index r = 0; r < wp.Cin.rows(); ++r)
        if (wp.Cin.row(r).dot(z) > wp.din(r) + feas_tol) return std::nullopt;
    return z;
}

}  // namespace detail

/// Active-set solve of the program above. On optimal exit the equality
/// residuals are below 1e-8 and the stationarity residual below 1e-6.
inline SolverReport solve_qp(const QuadraticProgram& qp, double tol = 1e-10,
                             int max_iter = 0) {
    SolverReport report;
    detail::WorkingProblem wp = detail::expand_problem(qp, &report.jitter_used);
    const Eigen::Index n = wp.n_orig;
    const Eigen::Index nz = wp.G.rows();
    const Eigen::Index n_in = wp.Cin.rows();
    if (max_iter <= 0) max_iter = 100 + 20 * static_cast<int>(nz);

    auto original_objective = [&](const VectorXd& w) {
        return 0.5 * w.dot(qp.P * w) + qp.q.dot(w);
    };

    std::optional<VectorXd> start = detail::feasible_start(qp, wp);
    if (!start) {
        report.status = SolverStatus::infeasible;
        report.solution = VectorXd::Zero(n);
        return report;
    }
    VectorXd z = *start;

    std::vector<char> in_working(static_cast<size_t>(n_in), 0);
    std::vector<int> working;  // inequality rows, in insertion order
    Eigen::LLT<MatrixXd> llt_G(wp.G);

    for (int iter = 1; iter <= max_iter; ++iter) {
        report.iterations = iter;
        const Eigen::Index m = wp.Aeq.rows() + static_cast<Eigen::Index>(working.size());
        const VectorXd grad = wp.G * z + wp.g;

        VectorXd d;
        VectorXd lambda;  // multipliers of the working inequality rows
        if (m == 0) {
            d = llt_G.solve(-grad);
        } else {
            MatrixXd At(nz, m);  // columns are constraint normals
            for (Eigen::Index r = 0; r < wp.Aeq.rows(); ++r) At.col(r) = wp.Aeq.row(r);
            for (size_t k = 0; k < working.size(); ++k)
                At.col(wp.Aeq.rows() + static_cast<Eigen::Index>(k)) =
                    wp.Cin.row(working[k]);

            Eigen::HouseholderQR<MatrixXd> qr(At);
            MatrixXd Q = qr.householderQ() * MatrixXd::Identity(nz, nz);
            const MatrixXd Z = Q.rightCols(nz - m);
            const MatrixXd Q1 = Q.leftCols(m);
            const MatrixXd R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();

            if (nz == m) {
                d = VectorXd::Zero(nz);
            } else {
                const MatrixXd H = Z.transpose() * wp.G * Z;
                Eigen::LLT<MatrixXd> llt_H(H);
                if (llt_H.info() != Eigen::Success)
                    throw singular_matrix_error("solve_qp: reduced Hessian not PD");
                d = Z * llt_H.solve(VectorXd(-Z.transpose() * grad));
            }
            const VectorXd all_mult =
                R.triangularView<Eigen::Upper>().solve(VectorXd(Q1.transpose() * (grad + wp.G * d)));
            lambda = all_mult.tail(static_cast<Eigen::Index>(working.size()));
        }

        const double step_scale = 1.0 + z.cwiseAbs().maxCoeff();
        if (d.cwiseAbs().maxCoeff() <= 1e-11 * step_scale) {
            // stationary on the working set; look for a constraint to drop
            int drop = -1;
            double most_negative = -tol * (1.0 + grad.cwiseAbs().maxCoeff());
            for (size_t k = 0; k < working.size(); ++k) {
                if (lambda(static_cast<Eigen::Index>(k)) < most_negative) {
                    most_negative = lambda(static_cast<Eigen::Index>(k));
                    drop = static_cast<int>(k);
                } else if (drop >= 0 &&
                           lambda(static_cast<Eigen::Index>(k)) == most_negative &&
                           working[k] < working[static_cast<size_t>(drop)]) {
                    drop = static_cast<int>(k);
                }
            }
            if (drop < 0) {
                report.status = SolverStatus::optimal;
                break;
            }
            in_working[static_cast<size_t>(working[static_cast<size_t>(drop)])] = 0;
            working.erase(working.begin() + drop);
            continue;
        }

        // step length: nearest blocking inequality, lowest index on ties
        double alpha = 1.0;
        int blocker = -1;
        for (Eigen::Index r = 0; r < n_in; ++r) {
            if (in_working[static_cast<size_t>(r)]) continue;
            const double cd = wp.Cin.row(r).dot(d);
            if (cd <= 1e-13 * step_scale) continue;
            const double slack = wp.din(r) - wp.Cin.row(r).dot(z);
            const double a_r = std::max(slack, 0.0) / cd;
            if (a_r < alpha - 1e-12) {
                alpha = a_r;
                blocker = static_cast<int>(r);
            }
        }
        z += alpha * d;
        if (blocker >= 0) {
            working.push_back(blocker);
            in_working[static_cast<size_t>(blocker)] = 1;
        }
    }

    report.solution = z.head(n);
    report.objective = original_objective(report.solution);

    if (report.status == SolverStatus::optimal) {
        // downgrade if the promised residuals do not hold
        double eq_resid = 0.0;
        for (const auto& [a, b] : qp.equalities)
            eq_resid = std::max(eq_resid, std::abs(a.dot(report.solution) - b));
        if (eq_resid > 1e-8) report.status = SolverStatus::max_iter;
    }
    return report;
}

}  // namespace divbench
