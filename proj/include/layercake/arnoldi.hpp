#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace layercake {

struct ArnoldiResult {
    Eigen::VectorXcd ritz_values;   // eigenvalues of the Hessenberg matrix
    Eigen::MatrixXcd ritz_vectors;  // V_m y, unit norm columns
    Eigen::VectorXd residual_estimates;  // |h_{m+1,m} y_m|
    int steps = 0;
};

/// m-step Arnoldi with classical Gram-Schmidt and one reorthogonalization pass.
/// `op(x, y)` writes y = Op x. A lucky breakdown truncates the factorization.
inline ArnoldiResult arnoldi(const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& op, int n, int m,
                             std::uint64_t seed) {
    m = std::min(m, n);
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v[i] = {gauss(rng), gauss(rng)};
    V.col(0) = v / v.norm();

    Eigen::VectorXcd w(n);
    int k = 0;
    for (; k < m; ++k) {
        op(V.col(k), w);
        const double wnorm0 = w.norm();
        Eigen::VectorXcd h = V.leftCols(k + 1).adjoint() * w;
        w.noalias() -= V.leftCols(k + 1) * h;
        Eigen::VectorXcd h2 = V.leftCols(k + 1).adjoint() * w;
        w.noalias() -= V.leftCols(k + 1) * h2;
        h += h2;
        H.col(k).head(k + 1) = h;
        const double beta = w.norm();
        H(k + 1, k) = beta;
        if (beta <= 1e-14 * std::max(1.0, wnorm0)) {
            ++k;
            break;
        }
        V.col(k + 1) = w / beta;
    }
    const int steps = k;

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(steps, steps));
    ArnoldiResult res;
    res.steps = steps;
    res.ritz_values = es.eigenvalues();
    res.ritz_vectors = V.leftCols(steps) * es.eigenvectors();
    res.residual_estimates.resize(steps);
    const double hlast = std::abs(H(steps, steps - 1));
    for (int i = 0; i < steps; ++i) {
        const double nrm = res.ritz_vectors.col(i).norm();
        if (nrm > 0) res.ritz_vectors.col(i) /= nrm;
        res.residual_estimates[i] = hlast * std::abs(es.eigenvectors()(steps - 1, i)) / (nrm > 0 ? nrm : 1.0);
    }
    return res;
}

}  // namespace layercake
