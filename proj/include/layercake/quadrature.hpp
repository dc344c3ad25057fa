#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace layercake::quad {

struct Rule {
    std::vector<double> points;   // on [-1, 1]
    std::vector<double> weights;
};

/// Gauss-Legendre rule with n points on [-1, 1] (Newton iteration on P_n).
inline Rule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    Rule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) { p1 = x; p0 = 1.0; }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        // recompute derivative at the converged root
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.points[i] = -x;
        rule.points[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.points[n / 2] = 0.0;
    return rule;
}

/// Gauss-Lobatto-Legendre nodes used as Lagrange interpolation points (p <= 3).
inline std::vector<double> lobatto_nodes(int p) {
    switch (p) {
        case 1: return {-1.0, 1.0};
        case 2: return {-1.0, 0.0, 1.0};
        case 3: {
            const double a = 1.0 / std::sqrt(5.0);
            return {-1.0, -a, a, 1.0};
        }
        default: throw std::invalid_argument("lobatto_nodes: order must be 1, 2 or 3");
    }
}

/// Values and first derivatives of the Lagrange basis on `nodes` at t.
inline void lagrange(const std::vector<double>& nodes, double t, double* val, double* der) {
    const int n = static_cast<int>(nodes.size());
    for (int i = 0; i < n; ++i) {
        double v = 1.0;
        double d = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double denom = nodes[i] - nodes[j];
            double term = 1.0 / denom;
            for (int k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                term *= (t - nodes[k]) / (nodes[i] - nodes[k]);
            }
            d += term;
            v *= (t - nodes[j]) / denom;
        }
        val[i] = v;
        der[i] = d;
    }
}

}  // namespace layercake::quad
