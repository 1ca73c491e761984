// Seeded generators shared by the test suites.
#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(std::mt19937& rng, Eigen::Index rows, Eigen::Index cols,
                              double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

inline VectorXd random_vector(std::mt19937& rng, Eigen::Index n, double lo = -1.0,
                              double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
}

// A A' + ridge keeps the spectrum comfortably positive.
inline MatrixXd random_spd(std::mt19937& rng, Eigen::Index n, double ridge = 0.1) {
    const MatrixXd a = random_matrix(rng, n, n);
    MatrixXd s = a * a.transpose() / static_cast<double>(n);
    s.diagonal().array() += ridge;
    return s;
}

// Covariance-scale SPD matrix resembling monthly return covariances.
inline MatrixXd random_covariance(std::mt19937& rng, Eigen::Index n) {
    MatrixXd s = random_spd(rng, n, 0.2) * 0.002;
    return s;
}

inline std::vector<double> normal_series(std::mt19937& rng, size_t n, double mean,
                                         double sd) {
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

inline MatrixXd normal_window(std::mt19937& rng, Eigen::Index rows, Eigen::Index cols,
                              double mean = 0.005, double sd = 0.04) {
    std::normal_distribution<double> dist(mean, sd);
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

}  // namespace testutil
