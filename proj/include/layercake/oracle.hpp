#pragma once

// Closed-form references for homogeneous media. Deliberately self-contained: no Eigen, no code
// shared with the finite-element path.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace layercake::oracle {

using cplx = std::complex<double>;

struct PlaneMode {
    cplx kappa;     // folded into [-pi/ell, pi/ell)
    int harmonic;   // m in exp(i 2 pi m xi2 / d)
    int fold;       // kappa = raw + 2 pi fold / ell
};

struct HomogeneousSpectrum {
    std::vector<PlaneMode> left, right;
};

/// Folded, classified and truncated plane-wave spectrum of a homogeneous cell.
inline HomogeneousSpectrum homogeneous_spectrum(double G, double rho, double ell, double d, double omega, double k2,
                                                int N) {
    const double pi = std::numbers::pi;
    const double tol = 1e-6 * pi / ell;
    std::vector<PlaneMode> all;
    const int mmax = N + 2 + static_cast<int>(std::ceil(std::abs(k2) * d / (2 * pi))) +
                     static_cast<int>(std::ceil(omega * std::sqrt(rho / G) * d / (2 * pi)));
    for (int m = -mmax; m <= mmax; ++m) {
        const double Km = k2 + 2 * pi * m / d;
        const double arg = omega * omega * rho / G - Km * Km;
        const cplx root = arg >= 0 ? cplx(std::sqrt(arg), 0) : cplx(0, std::sqrt(-arg));
        for (int sgn : {1, -1}) {
            const cplx raw = static_cast<double>(sgn) * root;
            const double period = 2 * pi / ell;
            int q = -static_cast<int>(std::floor((raw.real() + pi / ell) / period));
            if (raw.real() + q * period >= pi / ell) --q;
            all.push_back({raw + q * period, m, q});
        }
    }
    HomogeneousSpectrum hs;
    for (const auto& pm : all) {
        const bool left = pm.kappa.imag() < -tol || (std::abs(pm.kappa.imag()) <= tol && pm.kappa.real() < 0);
        (left ? hs.left : hs.right).push_back(pm);
    }
    auto cmp = [tol](const PlaneMode& a, const PlaneMode& b) {
        const bool ra = std::abs(a.kappa.imag()) <= tol, rb = std::abs(b.kappa.imag()) <= tol;
        if (ra != rb) return ra;
        const double ka = ra ? std::abs(a.kappa.real()) : std::abs(a.kappa.imag());
        const double kb = rb ? std::abs(b.kappa.real()) : std::abs(b.kappa.imag());
        if (ka != kb) return ka < kb;
        return a.kappa.real() < b.kappa.real();
    };
    std::stable_sort(hs.left.begin(), hs.left.end(), cmp);
    std::stable_sort(hs.right.begin(), hs.right.end(), cmp);
    hs.left.resize(std::min<std::size_t>(N, hs.left.size()));
    hs.right.resize(std::min<std::size_t>(N, hs.right.size()));
    return hs;
}

struct Layer {
    double G = 1.0, rho = 1.0, w = 1.0;
};

struct HomoStack {
    std::vector<Layer> layers;
    double G0 = 1.0, rho0 = 1.0;
    double omega = 1.0, theta = 0.0;
};

struct RT {
    cplx r, t;
};

/// m = 0 reflection and transmission from 2x2 transfer matrices of (u, G du/dxi1).
inline RT layered_1d_rt(const HomoStack& s) {
    const double c0 = std::sqrt(s.G0 / s.rho0);
    const double k1 = s.omega / c0 * std::cos(s.theta);
    const double k2 = s.omega / c0 * std::sin(s.theta);
    cplx P11 = 1, P12 = 0, P21 = 0, P22 = 1;
    for (const auto& L : s.layers) {
        const double arg = s.omega * s.omega * L.rho / L.G - k2 * k2;
        const cplx q = arg >= 0 ? cplx(std::sqrt(arg), 0) : cplx(0, std::sqrt(-arg));
        cplx a11, a12, a21, a22;
        if (std::abs(q) * L.w < 1e-12) {
            a11 = 1;
            a12 = L.w / L.G;
            a21 = 0;
            a22 = 1;
        } else {
            const cplx c = std::cos(q * L.w), sn = std::sin(q * L.w);
            a11 = c;
            a12 = sn / (L.G * q);
            a21 = -L.G * q * sn;
            a22 = c;
        }
        const cplx n11 = a11 * P11 + a12 * P21, n12 = a11 * P12 + a12 * P22;
        const cplx n21 = a21 * P11 + a22 * P21, n22 = a21 * P12 + a22 * P22;
        P11 = n11;
        P12 = n12;
        P21 = n21;
        P22 = n22;
    }
    const cplx iZ(0, s.G0 * k1);
    // (P11 - iZ P12) r - t = -(P11 + iZ P12);  (P21 - iZ P22) r - iZ t = -(P21 + iZ P22)
    const cplx a = P11 - iZ * P12, b = -1.0, e = -(P11 + iZ * P12);
    const cplx c = P21 - iZ * P22, dd = -iZ, f = -(P21 + iZ * P22);
    const cplx det = a * dd - b * c;
    return {(e * dd - b * f) / det, (a * f - e * c) / det};
}

}  // namespace layercake::oracle
