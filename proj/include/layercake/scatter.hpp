#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "layercake/bloch.hpp"
#include "layercake/errors.hpp"
#include "layercake/geometry.hpp"
#include "layercake/modal.hpp"

namespace layercake {

struct Strip {
    int medium = 0;       // index into the caller's list of mother media
    double width = 1.0;
    Translation s;
};

struct LayerCake {
    std::vector<Strip> strips;
    double G0 = 1.0, rho0 = 1.0;
    double omega = 1.0;
    double theta = 0.0;  // incidence angle from the xi1 axis
    double d = 1.0;

    double c0() const { return std::sqrt(G0 / rho0); }
    double k1() const { return omega / c0() * std::cos(theta); }
    double k2() const { return omega / c0() * std::sin(theta); }
    double length() const {
        double L = 0.0;
        for (const auto& s : strips) L += s.width;
        return L;
    }
    double x_left(std::size_t j) const {
        double x = 0.0;
        for (std::size_t i = 0; i < j; ++i) x += strips[i].width;
        return x;
    }
};

/// Interface blocks: [out_left; out_right] = [[T_left, R_right], [R_left, T_right]] [in_left; in_right].
struct InterfaceRT {
    CMat T_left, R_right, R_left, T_right;
    double residual = 0.0;     // relative least-squares residual of the continuity system
    std::vector<double> singular_values;
    int rank = 0;
};

/// Strict raises on numerical rank below the unknown count; MinimumNorm keeps the Moore-Penrose
/// solution and records the rank.
enum class RankPolicy { Strict, MinimumNorm };

struct ScatterOptions {
    TraceOptions traces;
    RankPolicy rank = RankPolicy::Strict;
    bool check_refactorized = true;
};

struct StripModal {
    LambdaBlock at_left;   // station 0 of the strip window
    LambdaBlock at_right;  // station w
    ExpBlock exp;
    int N = 0;
};

struct SweepBlocks {
    std::vector<CMat> R;      // generalized reflection, index j = 1..J+1 (slot 0 unused)
    std::vector<CMat> T;      // generalized transmission
    std::vector<CMat> U;      // source terms of the re-factorized form
    std::vector<CVec> S;
    std::vector<double> cond; // condition numbers of the systems solved per interface
};

struct ScatteringSolution {
    std::vector<CVec> beta_left, beta_right;  // per strip
    CVec r, t;
    double T_coeff = 0.0, R_coeff = 0.0, delta = 0.0;
    std::vector<double> interface_residuals;
    std::vector<int> interface_rank_deficit;  // unknowns minus numerical rank, per interface
    std::vector<double> sweep_condition;
    double refactorized_mismatch = 0.0;  // max relative beta difference between the two sweeps
    HalfspaceModal half;
};

namespace detail {

inline CMat pinv_solve(const CMat& lhs, const CMat& rhs, InterfaceRT& out, const char* where, RankPolicy policy) {
    Eigen::BDCSVD<CMat> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    out.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double cut = 1e-10 * (sv.size() ? sv[0] : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > cut) ++rank;
    out.rank = rank;
    if (rank < lhs.cols() && policy == RankPolicy::Strict) {
        throw RankDeficiencyError(std::string(where) + ": interface system has numerical rank " +
                                      std::to_string(rank) + " below " + std::to_string(lhs.cols()) + " unknowns",
                                  out.singular_values);
    }
    CVec inv(sv.size());
    for (int i = 0; i < sv.size(); ++i) inv[i] = sv[i] > cut ? 1.0 / sv[i] : 0.0;
    CMat X = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().adjoint() * rhs);
    const double rn = rhs.norm();
    out.residual = rn > 0.0 ? (lhs * X - rhs).norm() / rn : 0.0;
    return X;
}

}  // namespace detail

/// Least-squares interface map for continuity
///   prev_left a + prev_right' b = next_left' c + next_right e, solved for (a, e) given (c, b).
inline InterfaceRT interface_from_blocks(const CMat& prev_left, const CMat& next_right, const CMat& next_left_e,
                                         const CMat& prev_right_e, const char* where = "interface",
                                         RankPolicy policy = RankPolicy::Strict) {
    const int rows = static_cast<int>(prev_left.rows());
    const int na = static_cast<int>(prev_left.cols());
    const int ne = static_cast<int>(next_right.cols());
    const int nc = static_cast<int>(next_left_e.cols());
    const int nb = static_cast<int>(prev_right_e.cols());
    CMat lhs(rows, na + ne), rhs(rows, nc + nb);
    lhs << -prev_left, next_right;
    rhs << -next_left_e, prev_right_e;
    InterfaceRT rt;
    const CMat X = detail::pinv_solve(lhs, rhs, rt, where, policy);
    rt.T_left = X.topLeftCorner(na, nc);
    rt.R_right = X.topRightCorner(na, nb);
    rt.R_left = X.bottomLeftCorner(ne, nc);
    rt.T_right = X.bottomRightCorner(ne, nb);
    return rt;
}

inline InterfaceRT interface_rt_first(const HalfspaceModal& half, const LambdaBlock& lam1, const ExpBlock& exp1,
                                      RankPolicy policy = RankPolicy::Strict) {
    const int N = static_cast<int>(exp1.left.size());
    if (lam1.M != half.M) throw InputError("interface_rt_first: Fourier orders differ");
    if (2 * half.M + 1 < N) throw InputError("interface_rt_first: need 4M+2 >= 2M+N+1");
    return interface_from_blocks(half.left(), lam1.right(N), lam1.left(N) * exp1.left.asDiagonal(), half.right(),
                                 "first interface", policy);
}

inline InterfaceRT interface_rt_internal(const LambdaBlock& lam_prev, const LambdaBlock& lam_next,
                                         const ExpBlock& exp_prev, const ExpBlock& exp_next,
                                         RankPolicy policy = RankPolicy::Strict) {
    const int Np = static_cast<int>(exp_prev.left.size());
    const int Nn = static_cast<int>(exp_next.left.size());
    if (lam_prev.M != lam_next.M) throw InputError("interface_rt_internal: Fourier orders differ");
    if (4 * lam_prev.M + 2 < Np + Nn) throw InputError("interface_rt_internal: need 4M+2 >= 2N");
    return interface_from_blocks(lam_prev.left(Np), lam_next.right(Nn), lam_next.left(Nn) * exp_next.left.asDiagonal(),
                                 lam_prev.right(Np) * exp_prev.right.asDiagonal(), "internal interface", policy);
}

inline InterfaceRT interface_rt_last(const LambdaBlock& lamJ, const ExpBlock& expJ, const HalfspaceModal& half,
                                     RankPolicy policy = RankPolicy::Strict) {
    const int N = static_cast<int>(expJ.left.size());
    if (lamJ.M != half.M) throw InputError("interface_rt_last: Fourier orders differ");
    return interface_from_blocks(lamJ.left(N), half.right(), half.left(), lamJ.right(N) * expJ.right.asDiagonal(),
                                 "last interface", policy);
}

namespace detail {

inline CMat lu_solve_logged(const CMat& A, const CMat& rhs, int j, std::vector<double>& cond) {
    Eigen::JacobiSVD<CMat> svd(A);
    const auto& sv = svd.singularValues();
    const double c = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
    cond.push_back(c);
    if (!(c < 1e14)) {
        throw ResonanceError("generalized sweep: singular system (I - R R) at interface " + std::to_string(j), j);
    }
    return Eigen::PartialPivLU<CMat>(A).solve(rhs);
}

}  // namespace detail

/// Backward recursion for the generalized right-going reflection and transmission blocks.
inline SweepBlocks generalized_sweep(const std::vector<InterfaceRT>& ifc) {
    const int J = static_cast<int>(ifc.size()) - 1;
    if (J < 1) throw InputError("generalized_sweep: need at least two interfaces");
    SweepBlocks sb;
    sb.R.resize(J + 2);
    sb.T.resize(J + 2);
    sb.R[J + 1] = ifc[J].R_right;
    for (int j = J; j >= 1; --j) {
        const InterfaceRT& it = ifc[j - 1];
        const int n = static_cast<int>(it.R_left.rows());
        const CMat A = CMat::Identity(n, n) - it.R_left * sb.R[j + 1];
        sb.T[j] = detail::lu_solve_logged(A, it.T_right, j, sb.cond);
        sb.R[j] = it.R_right + it.T_left * sb.R[j + 1] * sb.T[j];
    }
    return sb;
}

/// Forward recursion for the left-going form beta_right^j = R^j beta_left^j + S_j with source i.
inline SweepBlocks refactorized_sweep(const std::vector<InterfaceRT>& ifc, const CVec& incident) {
    const int J = static_cast<int>(ifc.size()) - 1;
    if (J < 1) throw InputError("refactorized_sweep: need at least two interfaces");
    SweepBlocks sb;
    sb.R.resize(J + 1);
    sb.T.resize(J + 1);
    sb.U.resize(J + 1);
    sb.S.resize(J + 1);
    sb.R[1] = ifc[0].R_left;
    sb.S[1] = ifc[0].T_right * incident;
    for (int j = 2; j <= J; ++j) {
        const InterfaceRT& it = ifc[j - 1];
        const int n = static_cast<int>(it.R_right.rows());
        const CMat A = CMat::Identity(n, n) - it.R_right * sb.R[j - 1];
        CMat rhs(n, it.T_left.cols() + 1);
        rhs << it.T_left, it.R_right * sb.S[j - 1];
        const CMat X = detail::lu_solve_logged(A, rhs, j, sb.cond);
        sb.T[j] = X.leftCols(it.T_left.cols());
        sb.U[j] = X.rightCols(1);
        sb.R[j] = it.R_left + it.T_right * sb.R[j - 1] * sb.T[j];
        sb.S[j] = it.T_right * (sb.R[j - 1] * sb.U[j].col(0) + sb.S[j - 1]);
    }
    return sb;
}

inline double propagating_norm(const CVec& v, const HalfspaceModal& half) {
    double s = 0.0;
    for (int m = -half.M; m <= half.M; ++m)
        if (half.propagating(m)) s += std::norm(v[m + half.M]);
    return std::sqrt(s);
}

/// Solve from precomputed per-strip modal data.
inline ScatteringSolution solve_from_modal(const HalfspaceModal& half, const std::vector<StripModal>& strips,
                                           const ScatterOptions& opt = {}) {
    const int nm = 2 * half.M + 1;
    ScatteringSolution sol;
    sol.half = half;
    CVec inc = CVec::Zero(nm);
    inc[half.M] = 1.0;
    const int J = static_cast<int>(strips.size());
    if (J == 0) {
        sol.r = CVec::Zero(nm);
        sol.t = inc;
    } else {
        std::vector<InterfaceRT> ifc;
        ifc.reserve(J + 1);
        ifc.push_back(interface_rt_first(half, strips[0].at_left, strips[0].exp, opt.rank));
        for (int j = 1; j < J; ++j)
            ifc.push_back(interface_rt_internal(strips[j - 1].at_right, strips[j].at_left, strips[j - 1].exp,
                                                strips[j].exp, opt.rank));
        ifc.push_back(interface_rt_last(strips[J - 1].at_right, strips[J - 1].exp, half, opt.rank));
        for (const auto& it : ifc) {
            sol.interface_residuals.push_back(it.residual);
            sol.interface_rank_deficit.push_back(static_cast<int>(it.singular_values.size()) - it.rank);
        }

        const SweepBlocks sb = generalized_sweep(ifc);
        sol.sweep_condition = sb.cond;
        sol.beta_left.resize(J);
        sol.beta_right.resize(J);
        CVec prev = inc;
        for (int j = 1; j <= J; ++j) {
            sol.beta_right[j - 1] = sb.T[j] * prev;
            sol.beta_left[j - 1] = sb.R[j + 1] * sol.beta_right[j - 1];
            prev = sol.beta_right[j - 1];
        }
        sol.r = ifc[0].T_left * sol.beta_left[0] + ifc[0].R_right * inc;
        sol.t = ifc[J].T_right * sol.beta_right[J - 1];

        if (opt.check_refactorized) {
            const SweepBlocks lb = refactorized_sweep(ifc, inc);
            std::vector<CVec> bl(J), br(J);
            const int n = static_cast<int>(ifc[J].R_right.rows());
            const CMat A = CMat::Identity(n, n) - ifc[J].R_right * lb.R[J];
            std::vector<double> cond;
            bl[J - 1] = detail::lu_solve_logged(A, ifc[J].R_right * lb.S[J], J + 1, cond);
            for (int j = J; j >= 2; --j) bl[j - 2] = lb.T[j] * bl[j - 1] + lb.U[j].col(0);
            for (int j = 1; j <= J; ++j) br[j - 1] = lb.R[j] * bl[j - 1] + lb.S[j];
            double mis = 0.0;
            for (int j = 0; j < J; ++j) {
                const double nl = std::max(sol.beta_left[j].norm(), 1e-300);
                const double nr = std::max(sol.beta_right[j].norm(), 1e-300);
                mis = std::max(mis, (bl[j] - sol.beta_left[j]).norm() / std::max(nl, nr));
                mis = std::max(mis, (br[j] - sol.beta_right[j]).norm() / nr);
            }
            sol.refactorized_mismatch = mis;
        }
    }
    sol.T_coeff = propagating_norm(sol.t, half);
    sol.R_coeff = propagating_norm(sol.r, half);
    sol.delta = sol.T_coeff * sol.T_coeff + sol.R_coeff * sol.R_coeff - 1.0;
    return sol;
}

inline StripModal strip_modal(const BlochSpectrum& spec, const Strip& strip, int M, const TraceOptions& topt = {}) {
    StripModal sm;
    sm.N = spec.N;
    sm.at_left = trace_lambda(spec, 0.0, M, strip.s, topt);
    sm.at_right = trace_lambda(spec, strip.width, M, strip.s, topt);
    sm.exp = exp_block(spec, strip.width);
    return sm;
}

inline void check_spectra(const LayerCake& cake, const std::vector<const BlochSpectrum*>& spectra) {
    for (std::size_t j = 0; j < cake.strips.size(); ++j) {
        const std::size_t id = static_cast<std::size_t>(cake.strips[j].medium);
        if (id >= spectra.size() || spectra[id] == nullptr)
            throw InputError("strip " + std::to_string(j + 1) + " references an unknown medium");
        const BlochSpectrum& s = *spectra[id];
        if (std::abs(s.omega - cake.omega) > 1e-12 * std::max(1.0, cake.omega) ||
            std::abs(s.k2 - cake.k2()) > 1e-12 * std::max(1.0, std::abs(cake.k2())))
            throw InputError("strip " + std::to_string(j + 1) + ": spectrum computed at a different (omega, k2)");
        if (std::abs(s.mesh->d() - cake.d) > 1e-12) throw InputError("strip medium period differs from the cake's");
        if (s.N != spectra[cake.strips[0].medium]->N) throw InputError("strips use different N");
        if (!(cake.strips[j].width > 0.0)) throw InputError("strip widths must be positive");
    }
    if (!(cake.k1() > 0.0)) throw InputError("incident wave must travel towards +xi1");
}

/// Full solve: spectra[strip.medium] supplies the modes of each strip.
inline ScatteringSolution solve_scattering(const LayerCake& cake, const std::vector<const BlochSpectrum*>& spectra,
                                           int M, const ScatterOptions& opt = {}) {
    check_spectra(cake, spectra);
    const HalfspaceModal half = halfspace_modal(cake.omega, cake.k2(), M, cake.G0, cake.rho0, cake.d);
    std::vector<StripModal> sm;
    for (const auto& st : cake.strips) sm.push_back(strip_modal(*spectra[st.medium], st, M, opt.traces));
    return solve_from_modal(half, sm, opt);
}

// ---------------------------------------------------------------------------------------------
// fields and power flow

struct FieldSample {
    cplx u;
    cplx du1, du2;
};

inline FieldSample strip_field(const ScatteringSolution& sol, const LayerCake& cake, const BlochSpectrum& spec,
                               std::size_t j, double x_local, double y) {
    const Strip& st = cake.strips[j];
    const PeriodicMesh& mesh = *spec.mesh;
    const double k2 = cake.k2();
    FieldSample f{0.0, 0.0, 0.0};
    const double cx = x_local - st.s.s1;
    const double cy = y - st.s.s2;
    for (int n = 0; n < 2 * spec.N; ++n) {
        const BlochMode& mode = spec.modes[n];
        const bool left = n < spec.N;
        const cplx beta = left ? sol.beta_left[j][n] : sol.beta_right[j][n - spec.N];
        const cplx e = left ? std::exp(I_unit * mode.kappa * (x_local - st.width)) : std::exp(I_unit * mode.kappa * x_local);
        cplx v, dx, dy;
        evaluate_mode(mesh, mode, cx, cy, v, dx, dy);
        const cplx c = beta * e;
        f.u += c * v;
        f.du1 += c * (dx + I_unit * mode.kappa * v);
        f.du2 += c * (dy + I_unit * k2 * v);
    }
    const cplx ph = std::exp(I_unit * (k2 * y));
    f.u *= ph;
    f.du1 *= ph;
    f.du2 *= ph;
    return f;
}

inline FieldSample halfspace_field(const ScatteringSolution& sol, const LayerCake& cake, double x, double y) {
    const HalfspaceModal& h = sol.half;
    FieldSample f{0.0, 0.0, 0.0};
    const double L = cake.length();
    for (int m = -h.M; m <= h.M; ++m) {
        const double Km = h.k2 + 2.0 * std::numbers::pi * m / cake.d;
        const cplx ey = std::exp(I_unit * (Km * y));
        if (x < 0.0) {
            const cplx k = h.k_minus[m + h.M];
            const cplx c = sol.r[m + h.M] * std::exp(I_unit * k * x) * ey;
            f.u += c;
            f.du1 += I_unit * k * c;
            f.du2 += I_unit * Km * c;
        } else {
            const cplx k = h.k_plus[m + h.M];
            const cplx c = sol.t[m + h.M] * std::exp(I_unit * k * (x - L)) * ey;
            f.u += c;
            f.du1 += I_unit * k * c;
            f.du2 += I_unit * Km * c;
        }
    }
    if (x < 0.0) {
        const cplx c = std::exp(I_unit * (cake.k1() * x + cake.k2() * y));
        f.u += c;
        f.du1 += I_unit * cake.k1() * c;
        f.du2 += I_unit * cake.k2() * c;
    }
    return f;
}

/// Total field and gradient at xi. Points on an interface belong to the strip on their right.
inline FieldSample field_at(const ScatteringSolution& sol, const LayerCake& cake,
                            const std::vector<const BlochSpectrum*>& spectra, double x, double y) {
    const double L = cake.length();
    if (x < 0.0 || x >= L || cake.strips.empty()) return halfspace_field(sol, cake, x, y);
    double x0 = 0.0;
    for (std::size_t j = 0; j < cake.strips.size(); ++j) {
        const double w = cake.strips[j].width;
        if (x < x0 + w || j + 1 == cake.strips.size())
            return strip_field(sol, cake, *spectra[cake.strips[j].medium], j, x - x0, y);
        x0 += w;
    }
    return halfspace_field(sol, cake, x, y);
}

inline std::vector<cplx> reconstruct_field(const ScatteringSolution& sol, const LayerCake& cake,
                                           const std::vector<const BlochSpectrum*>& spectra,
                                           const std::vector<std::array<double, 2>>& points) {
    std::vector<cplx> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(field_at(sol, cake, spectra, p[0], p[1]).u);
    return out;
}

struct CellFlux {
    int strip = 0;  // 1-based
    int cell = 0;   // 0-based within the strip
    double P1 = 0.0, P2 = 0.0;
};

/// Y-averaged (omega/2) Im(conj(u) G grad u) over every unit cell of every strip.
inline std::vector<CellFlux> cell_poynting_map(const ScatteringSolution& sol, const LayerCake& cake,
                                               const std::vector<const BlochSpectrum*>& spectra, int points = 6) {
    std::vector<CellFlux> out;
    const quad::Rule g = quad::gauss_legendre(points);
    for (std::size_t j = 0; j < cake.strips.size(); ++j) {
        const Strip& st = cake.strips[j];
        const BlochSpectrum& spec = *spectra[st.medium];
        const PeriodicMesh& mesh = *spec.mesh;
        const double ell = mesh.ell(), d = mesh.d();
        const int ncell = std::max(1, static_cast<int>(std::ceil(st.width / ell - 1e-9)));
        for (int c = 0; c < ncell; ++c) {
            const double xa = c * ell, xb = std::min(st.width, (c + 1) * ell);
            const auto xb_pts = detail::breakpoints(xa, xb, mesh.hx(), st.s.s1);
            const auto yb_pts = detail::breakpoints(0.0, d, mesh.hy(), st.s.s2);
            cplx s1 = 0.0, s2 = 0.0;
            for (std::size_t ix = 0; ix + 1 < xb_pts.size(); ++ix) {
                const double hxs = 0.5 * (xb_pts[ix + 1] - xb_pts[ix]);
                for (std::size_t iy = 0; iy + 1 < yb_pts.size(); ++iy) {
                    const double hys = 0.5 * (yb_pts[iy + 1] - yb_pts[iy]);
                    int ex, ey;
                    double tx, ty;
                    mesh.locate(0.5 * (xb_pts[ix] + xb_pts[ix + 1]) - st.s.s1,
                                0.5 * (yb_pts[iy] + yb_pts[iy + 1]) - st.s.s2, ex, ey, tx, ty);
                    const double G = mesh.element_material(ex, ey).G;
                    for (std::size_t a = 0; a < g.points.size(); ++a)
                        for (std::size_t b = 0; b < g.points.size(); ++b) {
                            const double x = xb_pts[ix] + hxs * (g.points[a] + 1.0);
                            const double y = yb_pts[iy] + hys * (g.points[b] + 1.0);
                            const FieldSample f = strip_field(sol, cake, spec, j, x, y);
                            const double w = g.weights[a] * g.weights[b] * hxs * hys * G;
                            s1 += w * std::conj(f.u) * f.du1;
                            s2 += w * std::conj(f.u) * f.du2;
                        }
                }
            }
            const double area = (xb - xa) * d;
            out.push_back({static_cast<int>(j) + 1, c, 0.5 * cake.omega * s1.imag() / area,
                           0.5 * cake.omega * s2.imag() / area});
        }
    }
    return out;
}

/// Net xi1 power flux on each side computed from r and t (left: incident minus reflected).
inline std::array<double, 2> halfspace_fluxes(const ScatteringSolution& sol, const LayerCake& cake) {
    const HalfspaceModal& h = sol.half;
    double left = 0.5 * cake.omega * cake.G0 * cake.k1();
    double right = 0.0;
    for (int m = -h.M; m <= h.M; ++m) {
        if (!h.propagating(m)) continue;
        const double k = h.k_plus[m + h.M].real();
        left -= 0.5 * cake.omega * cake.G0 * k * std::norm(sol.r[m + h.M]);
        right += 0.5 * cake.omega * cake.G0 * k * std::norm(sol.t[m + h.M]);
    }
    return {left, right};
}

}  // namespace layercake
