#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "layercake/bloch.hpp"
#include "layercake/geometry.hpp"
#include "layercake/quadrature.hpp"

namespace layercake {

/// Fourier traces of 2N modes at one station: rows 0..2M hold Phi_m, rows 2M+1..4M+1 hold Psi_m.
struct LambdaBlock {
    CMat values;
    double station = 0.0;
    int M = 0;

    CMat left(int N) const { return values.leftCols(N); }
    CMat right(int N) const { return values.rightCols(N); }
};

struct ExpBlock {
    CVec left;   // exp(-i kappa_left w)
    CVec right;  // exp(+i kappa_right w)
    double w = 0.0;
};

struct TraceOptions {
    double band = 0.0;     // width of the flux-extraction band; 0 selects one element width
    int points = 8;        // Gauss points per sub-interval
    bool recompute = false;  // integrate translated fields directly instead of using the phase shift
};

namespace detail {

// sorted breakpoints of [lo, hi] from a uniform grid of spacing hgrid shifted by `offset`
inline std::vector<double> breakpoints(double lo, double hi, double hgrid, double offset) {
    std::vector<double> pts{lo};
    const double first = offset + hgrid * std::ceil((lo - offset) / hgrid);
    for (double x = first; x < hi; x += hgrid)
        if (x > lo + 1e-14 * hgrid) pts.push_back(x);
    if (hi - pts.back() <= 1e-14 * hgrid && pts.size() > 1) pts.back() = hi;
    else pts.push_back(hi);
    return pts;
}

}  // namespace detail

/// Fourier traces of every mode at window station X for a medium translated by s.
/// The stress trace is extracted from a weighted band integral of the weak form.
inline LambdaBlock trace_lambda(const BlochSpectrum& spec, double X, int M, Translation s = {},
                                const TraceOptions& opt = {}) {
    const PeriodicMesh& mesh = *spec.mesh;
    if (M < 0) throw InputError("trace_lambda: Fourier order M must be >= 0");
    if (mesh.ny() * mesh.order() < 2 * (2 * M + 1)) {
        throw InputError("trace_lambda: vertical resolution " + std::to_string(mesh.ny() * mesh.order()) +
                         " is coarser than 2(2M+1) samples per period");
    }
    const double ell = mesh.ell(), d = mesh.d();
    const double s1 = wrap_periodic(s.s1, ell), s2 = wrap_periodic(s.s2, d);
    const bool direct = opt.recompute;
    const double shift_y = direct ? s2 : 0.0;
    const double a = opt.band > 0.0 ? opt.band : mesh.hx();
    const double omega2 = spec.omega * spec.omega;
    const double k2 = spec.k2;
    const int nm = 2 * M + 1;
    const int nmodes = static_cast<int>(spec.modes.size());
    const double two_pi_d = 2.0 * std::numbers::pi / d;

    // window coordinates: material and modes are read at (xi1 - s1, xi2 - shift_y)
    const double Xc = direct ? X : X - s1;  // station in the frame where x-breaks are unshifted
    const double xoff = direct ? s1 : 0.0;
    const double yoff = shift_y;

    const quad::Rule g = quad::gauss_legendre(opt.points);
    const auto ybreaks = detail::breakpoints(0.0, d, mesh.hy(), yoff);
    const auto xbreaks = detail::breakpoints(Xc - a, Xc, mesh.hx(), xoff);

    LambdaBlock lb;
    lb.station = X;
    lb.M = M;
    lb.values = CMat::Zero(2 * nm, nmodes);

    std::vector<cplx> Em(nm);
    for (int n = 0; n < nmodes; ++n) {
        const BlochMode& mode = spec.modes[n];
        const cplx kap = mode.kappa;
        // displacement traces on the line xi1 = station
        for (std::size_t iy = 0; iy + 1 < ybreaks.size(); ++iy) {
            const double y0 = ybreaks[iy], y1 = ybreaks[iy + 1];
            const double hy = 0.5 * (y1 - y0);
            for (std::size_t q = 0; q < g.points.size(); ++q) {
                const double y = y0 + hy * (g.points[q] + 1.0);
                cplx v, dx, dy;
                evaluate_mode(mesh, mode, Xc - xoff, y - yoff, v, dx, dy);
                const cplx wv = v * (g.weights[q] * hy / d);
                for (int m = -M; m <= M; ++m)
                    lb.values(m + M, n) += wv * std::exp(-I_unit * (two_pi_d * m * y));
            }
        }
        // stress traces from the band [station - a, station]
        for (std::size_t ix = 0; ix + 1 < xbreaks.size(); ++ix) {
            const double x0 = xbreaks[ix], x1 = xbreaks[ix + 1];
            const double hxs = 0.5 * (x1 - x0);
            for (std::size_t p = 0; p < g.points.size(); ++p) {
                const double x = x0 + hxs * (g.points[p] + 1.0);
                const double chi = (x - (Xc - a)) / a;
                const double dchi = 1.0 / a;
                for (std::size_t iy = 0; iy + 1 < ybreaks.size(); ++iy) {
                    const double y0 = ybreaks[iy], y1 = ybreaks[iy + 1];
                    const double hy = 0.5 * (y1 - y0);
                    // material is constant on each sub-rectangle: read it at the midpoint
                    const Material mat = [&] {
                        int ex, ey;
                        double tx, ty;
                        mesh.locate(0.5 * (x0 + x1) - xoff, 0.5 * (y0 + y1) - yoff, ex, ey, tx, ty);
                        return mesh.element_material(ex, ey);
                    }();
                    for (std::size_t q = 0; q < g.points.size(); ++q) {
                        const double y = y0 + hy * (g.points[q] + 1.0);
                        cplx v, dx, dy;
                        evaluate_mode(mesh, mode, x - xoff, y - yoff, v, dx, dy);
                        const double wq = g.weights[p] * g.weights[q] * hxs * hy / d;
                        const cplx f1 = dx + I_unit * kap * v;
                        const cplx f2 = dy + I_unit * k2 * v;
                        for (int m = -M; m <= M; ++m) {
                            const double Km = k2 + two_pi_d * m;
                            const cplx integrand =
                                mat.G * (f1 * (dchi - I_unit * kap * chi) - I_unit * Km * chi * f2) -
                                omega2 * mat.rho * v * chi;
                            lb.values(nm + m + M, n) += wq * integrand * std::exp(-I_unit * (two_pi_d * m * y));
                        }
                    }
                }
            }
        }
    }
    if (!direct && s2 != 0.0) {
        for (int m = -M; m <= M; ++m) {
            const cplx ph = std::exp(-I_unit * (two_pi_d * m * s2));
            lb.values.row(m + M) *= ph;
            lb.values.row(nm + m + M) *= ph;
        }
    }
    return lb;
}

/// Phase-shift a block computed for s2 = 0 to a vertical offset s2.
inline LambdaBlock shift_lambda_vertically(const LambdaBlock& base, double s2, double d) {
    LambdaBlock out = base;
    const int nm = 2 * base.M + 1;
    for (int m = -base.M; m <= base.M; ++m) {
        const cplx ph = std::exp(-I_unit * (2.0 * std::numbers::pi * m * s2 / d));
        out.values.row(m + base.M) *= ph;
        out.values.row(nm + m + base.M) *= ph;
    }
    return out;
}

/// Traces of the analytic plane-wave modes of a homogeneous strip (G, rho). Mode (kappa, m) has
/// eigenfunction exp(i 2 pi m xi2 / d); columns follow the order of `kappas` and `harmonics`.
inline LambdaBlock analytic_lambda(const std::vector<cplx>& kappas, const std::vector<int>& harmonics, double G,
                                   double d, int M, double station, Translation s = {}) {
    LambdaBlock lb;
    lb.station = station;
    lb.M = M;
    const int nm = 2 * M + 1;
    lb.values = CMat::Zero(2 * nm, static_cast<int>(kappas.size()));
    for (std::size_t n = 0; n < kappas.size(); ++n) {
        const int m = harmonics[n];
        if (m < -M || m > M) continue;
        const cplx ph = std::exp(-I_unit * (2.0 * std::numbers::pi * m * s.s2 / d));
        lb.values(m + M, n) = ph;
        lb.values(nm + m + M, n) = I_unit * G * kappas[n] * ph;
    }
    return lb;
}

inline ExpBlock exp_block(const std::vector<cplx>& kappa_left, const std::vector<cplx>& kappa_right, double w) {
    if (!(w >= 0.0)) throw InputError("exp_block: width must be non-negative");
    ExpBlock e;
    e.w = w;
    e.left.resize(kappa_left.size());
    e.right.resize(kappa_right.size());
    for (std::size_t i = 0; i < kappa_left.size(); ++i) e.left[i] = std::exp(-I_unit * kappa_left[i] * w);
    for (std::size_t i = 0; i < kappa_right.size(); ++i) e.right[i] = std::exp(I_unit * kappa_right[i] * w);
    return e;
}

inline ExpBlock exp_block(const BlochSpectrum& spec, double w) {
    std::vector<cplx> l, r;
    for (int n = 0; n < spec.N; ++n) {
        l.push_back(spec.left(n).kappa);
        r.push_back(spec.right(n).kappa);
    }
    return exp_block(l, r, w);
}

struct HalfspaceModal {
    CVec k_minus, k_plus;  // per m = -M..M
    CVec S;                // i G0 k_minus
    CMat lambda0;          // [[I, I], [S, -S]]
    double G0 = 1.0, rho0 = 1.0, c0 = 1.0;
    double omega = 0.0, k2 = 0.0, d = 1.0;
    int M = 0;
    std::vector<int> grazing;  // harmonics perturbed off cutoff

    bool propagating(int m) const {
        const cplx k = k_plus[m + M];
        return std::abs(k.imag()) <= 1e-12 * std::max(1.0, std::abs(k.real())) && k.real() > 0.0;
    }
    CMat left() const { return lambda0.leftCols(2 * M + 1); }
    CMat right() const { return lambda0.rightCols(2 * M + 1); }
};

inline HalfspaceModal halfspace_modal(double omega, double k2, int M, double G0, double rho0, double d = 1.0,
                                      double tol_graze = 1e-8) {
    if (!(omega > 0.0)) throw InputError("halfspace_modal: frequency must be positive");
    if (!(G0 > 0.0) || !(rho0 > 0.0)) throw InputError("halfspace_modal: G0 and rho0 must be positive");
    if (M < 0) throw InputError("halfspace_modal: M must be >= 0");
    HalfspaceModal h;
    h.G0 = G0;
    h.rho0 = rho0;
    h.c0 = std::sqrt(G0 / rho0);
    h.omega = omega;
    h.k2 = k2;
    h.d = d;
    h.M = M;
    const int nm = 2 * M + 1;
    h.k_plus.resize(nm);
    h.k_minus.resize(nm);
    h.S.resize(nm);
    const double k0 = omega / h.c0;
    for (int m = -M; m <= M; ++m) {
        const double Km = k2 + 2.0 * std::numbers::pi * m / d;
        const double arg = k0 * k0 - Km * Km;
        cplx kp = arg >= 0.0 ? cplx(std::sqrt(arg), 0.0) : cplx(0.0, std::sqrt(-arg));
        if (std::abs(kp) < tol_graze) {
            kp = cplx(0.0, tol_graze);
            h.grazing.push_back(m);
        }
        h.k_plus[m + M] = kp;
        h.k_minus[m + M] = -kp;
        h.S[m + M] = I_unit * G0 * (-kp);
    }
    h.lambda0 = CMat::Zero(2 * nm, 2 * nm);
    h.lambda0.topLeftCorner(nm, nm).setIdentity();
    h.lambda0.topRightCorner(nm, nm).setIdentity();
    h.lambda0.bottomLeftCorner(nm, nm) = h.S.asDiagonal();
    h.lambda0.bottomRightCorner(nm, nm) = -CMat(h.S.asDiagonal());
    return h;
}

}  // namespace layercake
