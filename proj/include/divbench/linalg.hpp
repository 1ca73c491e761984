// Dense linear-algebra kernels shared by the estimators and strategies:
// symmetric positive-definite solves with an escalating diagonal-jitter
// retry policy, and ridge regression with unpenalized intercepts.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace divbench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class singular_matrix_error : public std::runtime_error {
public:
    explicit singular_matrix_error(const std::string& what) : std::runtime_error(what) {}
};

/// Cholesky factorization of a symmetric matrix with jitter retries.
/// Near-singular inputs are loaded with eps*trace(S)/N on the diagonal for
/// eps in {0, 1e-12, 1e-10, 1e-8}; the jitter actually used is recorded.
class SpdSolver {
public:
    explicit SpdSolver(const MatrixXd& S, double symmetry_tol = 1e-10) {
        const Eigen::Index n = S.rows();
        if (S.cols() != n) throw std::invalid_argument("SpdSolver: matrix not square");
        if ((S - S.transpose()).cwiseAbs().maxCoeff() >
            symmetry_tol * std::max(1.0, S.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("SpdSolver: matrix not symmetric");

        const double scale = n > 0 ? std::max(S.trace() / static_cast<double>(n),
                                              std::numeric_limits<double>::min())
                                   : 1.0;
        static constexpr double kJitters[] = {0.0, 1e-12, 1e-10, 1e-8};
        for (double eps : kJitters) {
            MatrixXd loaded = S;
            loaded.diagonal().array() += eps * scale;
            llt_.compute(loaded);
            if (llt_.info() == Eigen::Success && is_usable(loaded)) {
                jitter_ = eps;
                return;
            }
        }
        std::ostringstream os;
        os << "SpdSolver: matrix singular after max jitter (rcond~"
           << condition_estimate(S) << ")";
        throw singular_matrix_error(os.str());
    }

    VectorXd solve(const VectorXd& b) const { return llt_.solve(b); }
    MatrixXd solve(const MatrixXd& B) const { return llt_.solve(B); }

    /// Jitter multiplier that was needed (0 if the plain factorization held).
    double jitter_used() const { return jitter_; }

private:
    // LLT can report Success on barely-positive matrices whose solves are
    // garbage; require the pivots to stay above a scaled floor.
    bool is_usable(const MatrixXd& loaded) const {
        const auto& L = llt_.matrixLLT();
        const Eigen::Index n = L.rows();
        if (n == 0) return true;
        double dmin = L(0, 0), dmax = L(0, 0);
        for (Eigen::Index i = 1; i < n; ++i) {
            dmin = std::min(dmin, L(i, i));
            dmax = std::max(dmax, L(i, i));
        }
        (void)loaded;
        return dmin > 0.0 && dmin > 1e-14 * dmax;
    }

    static double condition_estimate(const MatrixXd& S) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
        const VectorXd ev = es.eigenvalues();
        const double lo = ev.minCoeff(), hi = ev.maxCoeff();
        if (hi <= 0.0) return 0.0;
        return lo / hi;
    }

    Eigen::LLT<MatrixXd> llt_;
    double jitter_ = 0.0;
};

/// Solve S x = b for symmetric S under the jitter policy above.
/// Optionally reports which jitter multiplier was required.
inline VectorXd solve_spd(const MatrixXd& S, const VectorXd& b,
                          double* jitter_used = nullptr) {
    if (b.size() != S.rows()) throw std::invalid_argument("solve_spd: size mismatch");
    SpdSolver solver(S);
    if (jitter_used) *jitter_used = solver.jitter_used();
    return solver.solve(b);
}

struct RidgeFit {
    VectorXd intercepts;   // one per response column
    MatrixXd coefficients; // predictors x responses
};

/// Ridge regression on column-demeaned data; intercepts are unpenalized.
/// Per response column solves (Xc'Xc + alpha I) beta = Xc'Yc and recovers
/// the intercept as mean(y) - mean(x)'beta. alpha = 0 reduces to OLS.
inline RidgeFit ridge_regression(const MatrixXd& X, const MatrixXd& Y, double alpha) {
    const Eigen::Index t = X.rows(), p = X.cols(), m = Y.cols();
    if (t == 0) throw std::invalid_argument("ridge_regression: zero rows");
    if (Y.rows() != t) throw std::invalid_argument("ridge_regression: row mismatch");
    if (t < 2) throw std::invalid_argument("ridge_regression: need at least 2 rows");
    if (alpha < 0.0) throw std::invalid_argument("ridge_regression: alpha must be >= 0");
    if (!X.allFinite() || !Y.allFinite())
        throw std::invalid_argument("ridge_regression: non-finite entries");

    const VectorXd x_mean = X.colwise().mean();
    const VectorXd y_mean = Y.colwise().mean();
    const MatrixXd Xc = X.rowwise() - x_mean.transpose();
    const MatrixXd Yc = Y.rowwise() - y_mean.transpose();

    MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += alpha;

    RidgeFit fit;
    SpdSolver solver(gram);
    fit.coefficients = solver.solve(MatrixXd(Xc.transpose() * Yc));
    fit.intercepts = y_mean - fit.coefficients.transpose() * x_mean;
    return fit;
}

}  // namespace divbench
