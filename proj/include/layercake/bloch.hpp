#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "layercake/arnoldi.hpp"
#include "layercake/errors.hpp"
#include "layercake/geometry.hpp"
#include "layercake/mesh.hpp"
#include "layercake/quadrature.hpp"

namespace layercake {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr cplx I_unit{0.0, 1.0};

/// Sparse A, B, C of A + kappa B + kappa^2 C at fixed (omega, k2). All three share one pattern.
struct QevpMatrices {
    SpMat A, B, C;
    double omega = 0.0;
    double k2 = 0.0;
    double normA = 0.0, normB = 0.0, normC = 0.0;  // induced 1-norms
};

inline double one_norm(const SpMat& m) {
    double best = 0.0;
    for (int k = 0; k < m.outerSize(); ++k) {
        double s = 0.0;
        for (SpMat::InnerIterator it(m, k); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

inline QevpMatrices assemble_qevp(const PeriodicMesh& mesh, double omega, double k2) {
    if (mesh.elements() == 0 || mesh.dofs() == 0) throw InputError("assemble_qevp: empty mesh");
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw InputError("assemble_qevp: frequency must be non-negative");
    if (!std::isfinite(k2)) throw InputError("assemble_qevp: k2 must be finite");

    const int p = mesh.order();
    const int nl = p + 1;
    const auto& ref = mesh.local_nodes();
    const quad::Rule g = quad::gauss_legendre(p + 1);

    // 1D reference matrices on [-1,1]: mass, stiffness, D[i][j] = int l_i l_j'
    std::vector<double> M1(nl * nl, 0.0), K1(nl * nl, 0.0), D1(nl * nl, 0.0);
    double lv[4], ld[4];
    for (std::size_t q = 0; q < g.points.size(); ++q) {
        quad::lagrange(ref, g.points[q], lv, ld);
        for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j) {
                M1[i * nl + j] += g.weights[q] * lv[i] * lv[j];
                K1[i * nl + j] += g.weights[q] * ld[i] * ld[j];
                D1[i * nl + j] += g.weights[q] * lv[i] * ld[j];
            }
    }

    const double hx = mesh.hx(), hy = mesh.hy();
    const int ne = nl * nl;
    std::vector<double> mass(ne * ne), stiff(ne * ne), skx(ne * ne), sky(ne * ne);
    for (int b = 0; b < nl; ++b)
        for (int a = 0; a < nl; ++a)
            for (int e = 0; e < nl; ++e)
                for (int c = 0; c < nl; ++c) {
                    const int I = a + nl * b, J = c + nl * e;
                    const double mx = M1[a * nl + c], my = M1[b * nl + e];
                    mass[I * ne + J] = 0.25 * hx * hy * mx * my;
                    stiff[I * ne + J] = (hy / hx) * K1[a * nl + c] * my + (hx / hy) * mx * K1[b * nl + e];
                    skx[I * ne + J] = 0.5 * hy * (D1[a * nl + c] - D1[c * nl + a]) * my;
                    sky[I * ne + J] = 0.5 * hx * mx * (D1[b * nl + e] - D1[e * nl + b]);
                }

    using Trip = Eigen::Triplet<cplx>;
    std::vector<Trip> ta, tb, tc;
    const std::size_t reserve = static_cast<std::size_t>(mesh.elements()) * ne * ne;
    ta.reserve(reserve);
    tb.reserve(reserve);
    tc.reserve(reserve);
    std::vector<int> dofs(ne);
    const double w2 = omega * omega;
    for (int ey = 0; ey < mesh.ny(); ++ey) {
        for (int ex = 0; ex < mesh.nx(); ++ex) {
            mesh.element_dofs(ex, ey, dofs.data());
            const Material& mat = mesh.element_material(ex, ey);
            for (int I = 0; I < ne; ++I) {
                for (int J = 0; J < ne; ++J) {
                    const int k = I * ne + J;
                    const cplx a = mat.G * (k2 * k2 * mass[k] + stiff[k]) - I_unit * (mat.G * k2 * sky[k]) -
                                   w2 * mat.rho * mass[k];
                    const cplx bb = -I_unit * (mat.G * skx[k]);
                    ta.emplace_back(dofs[I], dofs[J], a);
                    tb.emplace_back(dofs[I], dofs[J], bb);
                    tc.emplace_back(dofs[I], dofs[J], mat.G * mass[k]);
                }
            }
        }
    }
    const int n = mesh.dofs();
    QevpMatrices q;
    q.omega = omega;
    q.k2 = k2;
    q.A.resize(n, n);
    q.B.resize(n, n);
    q.C.resize(n, n);
    q.A.setFromTriplets(ta.begin(), ta.end());
    q.B.setFromTriplets(tb.begin(), tb.end());
    q.C.setFromTriplets(tc.begin(), tc.end());
    q.A.makeCompressed();
    q.B.makeCompressed();
    q.C.makeCompressed();
    q.normA = one_norm(q.A);
    q.normB = one_norm(q.B);
    q.normC = one_norm(q.C);
    return q;
}

/// Scaled backward error of (kappa, phi): |Q(kappa) phi| / (|phi| (|A| + |kappa||B| + |kappa|^2|C|)).
inline double qevp_residual(const QevpMatrices& q, cplx kappa, const CVec& phi) {
    const CVec r = q.A * phi + kappa * (q.B * phi) + (kappa * kappa) * (q.C * phi);
    const double ak = std::abs(kappa);
    const double scale = phi.norm() * (q.normA + ak * q.normB + ak * ak * q.normC);
    return scale > 0.0 ? r.norm() / scale : r.norm();
}

/// Factorization of Q(sigma) = A + sigma B + sigma^2 C reusing the common sparsity pattern.
class QuadraticPencilLU {
public:
    explicit QuadraticPencilLU(const QevpMatrices& q) : q_(q), Q_(q.A) {
        same_pattern_ = q.A.nonZeros() == q.B.nonZeros() && q.A.nonZeros() == q.C.nonZeros();
        lu_.analyzePattern(Q_);
    }

    bool factor(cplx sigma) {
        sigma_ = sigma;
        if (same_pattern_) {
            const cplx s2 = sigma * sigma;
            const cplx* a = q_.A.valuePtr();
            const cplx* b = q_.B.valuePtr();
            const cplx* c = q_.C.valuePtr();
            cplx* v = Q_.valuePtr();
            for (Eigen::Index k = 0; k < Q_.nonZeros(); ++k) v[k] = a[k] + sigma * b[k] + s2 * c[k];
        } else {
            Q_ = q_.A + sigma * q_.B + (sigma * sigma) * q_.C;
            lu_.analyzePattern(Q_);
        }
        lu_.factorize(Q_);
        return lu_.info() == Eigen::Success;
    }

    CVec solve(const CVec& rhs) const { return lu_.solve(rhs); }
    cplx sigma() const noexcept { return sigma_; }

private:
    const QevpMatrices& q_;
    SpMat Q_;
    bool same_pattern_ = false;
    cplx sigma_{};
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

enum class EigenMethod { Arnoldi, Dense };

struct SolveOptions {
    int frak_N = 200;
    cplx shift{0.0, 0.1};
    double tol_res = 1e-8;
    std::uint64_t seed = 0x5eed5eedULL;
    EigenMethod method = EigenMethod::Arnoldi;
};

struct RawEigenpair {
    cplx kappa;
    CVec phi;
    double residual = 0.0;
};

struct RawSpectrum {
    std::vector<RawEigenpair> pairs;
    cplx shift_used{};
    int krylov_steps = 0;
    int refined = 0;
};

namespace detail {

inline cplx rayleigh_root(const QevpMatrices& q, const CVec& phi, cplx near) {
    const cplx a = phi.dot(q.C * phi);
    const cplx b = phi.dot(q.B * phi);
    const cplx c = phi.dot(q.A * phi);
    if (std::abs(a) == 0.0) return near;
    const cplx disc = std::sqrt(b * b - 4.0 * a * c);
    const cplx r1 = (-b + disc) / (2.0 * a);
    const cplx r2 = (-b - disc) / (2.0 * a);
    return std::abs(r1 - near) <= std::abs(r2 - near) ? r1 : r2;
}

// local inverse iteration for Q(kappa) phi = 0 started at (kappa, phi)
inline RawEigenpair refine_pair(const QevpMatrices& q, cplx kappa, CVec phi, double tol) {
    RawEigenpair best{kappa, phi, qevp_residual(q, kappa, phi)};
    QuadraticPencilLU lu(q);
    cplx mu = kappa;
    for (int outer = 0; outer < 3 && best.residual > tol; ++outer) {
        if (!lu.factor(mu)) {
            mu += 1e-10 * (1.0 + std::abs(mu));
            if (!lu.factor(mu)) break;
        }
        for (int it = 0; it < 3; ++it) {
            CVec y = q.B * phi + (2.0 * mu) * (q.C * phi);
            phi = lu.solve(y);
            const double nrm = phi.norm();
            if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
            phi /= nrm;
            kappa = rayleigh_root(q, phi, mu);
            const double res = qevp_residual(q, kappa, phi);
            if (res < best.residual) best = {kappa, phi, res};
            if (res <= tol) break;
        }
        mu = best.kappa;
    }
    return best;
}

inline bool is_duplicate(const RawEigenpair& a, const RawEigenpair& b) {
    if (std::abs(a.kappa - b.kappa) > 1e-8 * (1.0 + std::abs(a.kappa))) return false;
    const double c = std::abs(a.phi.dot(b.phi)) / (a.phi.norm() * b.phi.norm());
    return c > 1.0 - 1e-6;
}

inline double select_metric(cplx kappa, cplx shift) { return std::abs(kappa - shift.real()); }

// keep frak_N pairs nearest the shift's real part without splitting a conjugate pair at the cut
inline std::vector<RawEigenpair> select_nearest(std::vector<RawEigenpair> pairs, int frak_N, cplx shift) {
    std::sort(pairs.begin(), pairs.end(), [shift](const RawEigenpair& a, const RawEigenpair& b) {
        const double ma = select_metric(a.kappa, shift), mb = select_metric(b.kappa, shift);
        if (ma != mb) return ma < mb;
        if (a.kappa.real() != b.kappa.real()) return a.kappa.real() < b.kappa.real();
        return a.kappa.imag() < b.kappa.imag();
    });
    std::size_t keep = std::min<std::size_t>(frak_N, pairs.size());
    if (keep < pairs.size() && keep > 0) {
        const cplx last = pairs[keep - 1].kappa;
        const cplx next = pairs[keep].kappa;
        if (std::abs(last.imag()) > 1e-9 && std::abs(next - std::conj(last)) <= 1e-6 * (1.0 + std::abs(last))) ++keep;
    }
    pairs.resize(keep);
    return pairs;
}

inline std::vector<RawEigenpair> dense_pairs(const QevpMatrices& q) {
    const int n = static_cast<int>(q.A.rows());
    const CMat A(q.A), B(q.B), C(q.C);
    Eigen::PartialPivLU<CMat> clu(C);
    CMat K = CMat::Zero(2 * n, 2 * n);
    K.topRightCorner(n, n).setIdentity();
    K.bottomLeftCorner(n, n) = -clu.solve(A);
    K.bottomRightCorner(n, n) = -clu.solve(B);
    Eigen::ComplexEigenSolver<CMat> es(K);
    std::vector<RawEigenpair> out;
    out.reserve(2 * n);
    for (int i = 0; i < 2 * n; ++i) {
        CVec phi = es.eigenvectors().col(i).head(n);
        const double nrm = phi.norm();
        if (nrm > 0) phi /= nrm;
        const cplx k = es.eigenvalues()[i];
        out.push_back({k, phi, qevp_residual(q, k, phi)});
    }
    return out;
}

}  // namespace detail

/// Eigenpairs of the companion linearization nearest the shift, residual-checked.
inline RawSpectrum solve_spectrum(const QevpMatrices& q, const SolveOptions& opt) {
    if (opt.frak_N < 2) throw InputError("solve_spectrum: frak_N must be >= 2");
    const int n = static_cast<int>(q.A.rows());
    const int target = opt.frak_N + std::max(10, opt.frak_N / 5);

    auto finish = [&](std::vector<RawEigenpair> cand, cplx sigma, int steps, int refined) {
        std::vector<RawEigenpair> accepted;
        for (auto& c : cand) {
            if (!(c.residual <= opt.tol_res)) continue;
            bool dup = false;
            for (const auto& a : accepted)
                if (detail::is_duplicate(a, c)) {
                    dup = true;
                    break;
                }
            if (!dup) accepted.push_back(std::move(c));
        }
        RawSpectrum rs;
        rs.shift_used = sigma;
        rs.krylov_steps = steps;
        rs.refined = refined;
        rs.pairs = detail::select_nearest(std::move(accepted), opt.frak_N, sigma);
        return rs;
    };

    std::vector<double> last_residuals;
    if (opt.method == EigenMethod::Dense) {
        if (n > 800) throw InputError("dense QEVP path is limited to 800 DOFs");
        auto all = detail::dense_pairs(q);
        std::vector<RawEigenpair> cand = detail::select_nearest(all, target, opt.shift);
        int refined = 0;
        for (auto& c : cand)
            if (c.residual > opt.tol_res) {
                c = detail::refine_pair(q, c.kappa, c.phi, opt.tol_res);
                ++refined;
            }
        RawSpectrum rs = finish(std::move(cand), opt.shift, 2 * n, refined);
        if (static_cast<int>(rs.pairs.size()) >= std::min(opt.frak_N, 2 * n)) return rs;
        for (const auto& c : all) last_residuals.push_back(c.residual);
        throw SolverError("dense QEVP solve: too few eigenpairs passed the residual check", last_residuals);
    }

    std::vector<cplx> ladder{opt.shift};
    for (cplx s : {cplx(0.0, 0.1), cplx(0.5, 0.1), cplx(-0.5, 0.1)})
        if (std::abs(s - opt.shift) > 1e-14) ladder.push_back(s);

    for (cplx sigma : ladder) {
        QuadraticPencilLU lu(q);
        if (!lu.factor(sigma)) continue;
        const SpMat BsC = q.B + sigma * q.C;
        auto op = [&](const CVec& v, CVec& out) {
            const auto v1 = v.head(n);
            const auto v2 = v.tail(n);
            const CVec rhs = q.C * v2 + BsC * v1;
            CVec x1 = -lu.solve(rhs);
            out.resize(2 * n);
            out.tail(n) = v1 + sigma * x1;
            out.head(n) = std::move(x1);
        };
        int m = std::min(2 * n, std::max(2 * target, target + 30));
        for (int attempt = 0; attempt < 2; ++attempt) {
            const ArnoldiResult ar = arnoldi(op, 2 * n, m, opt.seed + attempt);
            std::vector<int> order(ar.steps);
            for (int i = 0; i < ar.steps; ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](int a, int b) { return std::abs(ar.ritz_values[a]) > std::abs(ar.ritz_values[b]); });
            std::vector<RawEigenpair> cand;
            int refined = 0;
            last_residuals.clear();
            for (int idx = 0; idx < std::min<int>(ar.steps, target); ++idx) {
                const int i = order[idx];
                const cplx theta = ar.ritz_values[i];
                if (std::abs(theta) < 1e-300) continue;
                const cplx kappa = sigma + 1.0 / theta;
                CVec phi = ar.ritz_vectors.col(i).head(n);
                const double nrm = phi.norm();
                if (!(nrm > 0.0)) continue;
                phi /= nrm;
                RawEigenpair rp{kappa, phi, qevp_residual(q, kappa, phi)};
                if (rp.residual > opt.tol_res) {
                    rp = detail::refine_pair(q, rp.kappa, rp.phi, opt.tol_res);
                    ++refined;
                }
                last_residuals.push_back(rp.residual);
                cand.push_back(std::move(rp));
            }
            RawSpectrum rs = finish(std::move(cand), sigma, ar.steps, refined);
            if (static_cast<int>(rs.pairs.size()) >= std::min(opt.frak_N, 2 * n)) return rs;
            if (m >= 2 * n) break;
            m = std::min(2 * n, m + m / 2);
        }
    }
    if (n <= 800) {
        SolveOptions dense = opt;
        dense.method = EigenMethod::Dense;
        return solve_spectrum(q, dense);
    }
    throw SolverError("QEVP solve did not converge for any shift in the retry ladder", last_residuals);
}

// ---------------------------------------------------------------------------------------------
// folding, classification

struct FoldResult {
    cplx kappa;
    CVec phi;
    int q = 0;  // kappa' = kappa + 2 pi q / ell, phi' = phi exp(-i 2 pi q xi1 / ell)
};

inline int essential_strip_index(cplx kappa, double ell) {
    const double period = 2.0 * std::numbers::pi / ell;
    const double half = std::numbers::pi / ell;
    int q = -static_cast<int>(std::floor((kappa.real() + half) / period));
    double re = kappa.real() + q * period;
    if (re >= half) --q;
    re = kappa.real() + q * period;
    if (re < -half) ++q;
    return q;
}

/// Fold (kappa, phi) into Re kappa in [-pi/ell, pi/ell). The nodal field is multiplied pointwise.
inline FoldResult fold_to_essential_strip(cplx kappa, const CVec& phi, const PeriodicMesh& mesh) {
    FoldResult f;
    f.q = essential_strip_index(kappa, mesh.ell());
    f.kappa = kappa + 2.0 * std::numbers::pi * f.q / mesh.ell();
    f.phi = phi;
    if (f.q != 0) {
        const int Nx = mesh.nx() * mesh.order();
        const int Ny = mesh.ny() * mesh.order();
        for (int j = 0; j < Ny; ++j)
            for (int i = 0; i < Nx; ++i) {
                const double x = mesh.node_coords(i, j)[0];
                f.phi[mesh.dof(i, j)] *= std::exp(-I_unit * (2.0 * std::numbers::pi * f.q * x / mesh.ell()));
            }
    }
    return f;
}

enum class Direction { Left, Right };

struct BlochMode {
    cplx kappa;     // folded into the essential strip
    int fold = 0;   // kappa = kappa_raw + 2 pi fold / ell
    CVec phi;       // nodal values of the unfolded eigenfunction, max |phi| = 1
    Direction direction = Direction::Right;
    double residual = 0.0;

    cplx kappa_raw(double ell) const { return kappa - 2.0 * std::numbers::pi * fold / ell; }
};

struct BlochSpectrum {
    std::vector<BlochMode> modes;  // N left-going, then N right-going
    int N = 0;
    double omega = 0.0;
    double k2 = 0.0;
    std::string cell_id;
    std::shared_ptr<const PeriodicMesh> mesh;
    std::vector<cplx> strip_eigenvalues;  // every accepted eigenvalue in the strip, untruncated
    int repeated = 0;                     // near-coincident eigenvalue pairs in the strip
    int edge_merged = 0;                  // zone-edge duplicates removed

    const BlochMode& left(int n) const { return modes[n]; }
    const BlochMode& right(int n) const { return modes[N + n]; }
};

inline double tol_im(double ell) { return 1e-6 * std::numbers::pi / ell; }

/// Two strip eigenvalues closer than this fraction of 2 pi/ell modulo 2 pi/ell are one mode.
inline constexpr double kEdgeMergeTol = 1e-3;

inline Direction classify(cplx kappa, double ell) {
    const double t = tol_im(ell);
    if (kappa.imag() < -t) return Direction::Left;
    if (std::abs(kappa.imag()) <= t && kappa.real() < 0.0) return Direction::Left;
    return Direction::Right;
}

inline void normalize_mode(CVec& phi) {
    Eigen::Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    const cplx piv = phi[imax];
    if (std::abs(piv) > 0.0) phi /= piv;
}

/// Restrict the raw set to the essential strip, classify, order and keep N modes per side.
inline BlochSpectrum classify_and_truncate(const RawSpectrum& raw, int N, std::shared_ptr<const PeriodicMesh> mesh,
                                           double omega, double k2) {
    if (N < 1) throw InputError("classify_and_truncate: N must be >= 1");
    const double ell = mesh->ell();
    const double t = tol_im(ell);
    std::vector<BlochMode> left, right;
    BlochSpectrum s;
    // a zone-edge mode shows up at Re ~ pi/ell and at Re ~ -pi/ell, either copy possibly a hair
    // outside the strip; accept both within the merge tolerance and keep one
    const double period = 2.0 * std::numbers::pi / ell;
    const double tau = kEdgeMergeTol * period;
    std::vector<const RawEigenpair*> inside;
    std::vector<char> outside;
    for (const auto& rp : raw.pairs) {
        const int q = essential_strip_index(rp.kappa, ell);
        if (q == 0) {
            inside.push_back(&rp);
            outside.push_back(0);
        } else if ((q == -1 || q == 1) && std::abs(rp.kappa.real()) - 0.5 * period <= tau) {
            inside.push_back(&rp);
            outside.push_back(1);
        }
    }
    std::vector<char> drop(inside.size(), 0);
    for (std::size_t i = 0; i < inside.size(); ++i)
        for (std::size_t j = 0; j < inside.size(); ++j) {
            if (i == j || drop[i] || drop[j]) continue;
            if (std::abs(inside[i]->kappa - period - inside[j]->kappa) > tau) continue;
            const bool real = std::abs(inside[i]->kappa.imag()) <= t;
            if (outside[i] != outside[j]) {
                drop[outside[i] ? i : j] = 1;
            } else if (real && !outside[i]) {
                continue;  // distinct band-edge pair
            } else {
                drop[i] = 1;
            }
            ++s.edge_merged;
        }
    for (std::size_t i = 0; i < inside.size(); ++i) {
        if (drop[i]) continue;
        const RawEigenpair& rp = *inside[i];
        BlochMode m;
        m.kappa = rp.kappa;
        m.fold = 0;
        m.phi = rp.phi;
        normalize_mode(m.phi);
        m.residual = rp.residual;
        m.direction = classify(m.kappa, ell);
        s.strip_eigenvalues.push_back(m.kappa);
        (m.direction == Direction::Left ? left : right).push_back(std::move(m));
    }
    for (std::size_t i = 0; i < s.strip_eigenvalues.size(); ++i)
        for (std::size_t j = i + 1; j < s.strip_eigenvalues.size(); ++j)
            if (std::abs(s.strip_eigenvalues[i] - s.strip_eigenvalues[j]) <=
                1e-6 * (1.0 + std::abs(s.strip_eigenvalues[i])))
                ++s.repeated;
    auto order = [t](const BlochMode& a, const BlochMode& b) {
        const bool ra = std::abs(a.kappa.imag()) <= t, rb = std::abs(b.kappa.imag()) <= t;
        if (ra != rb) return ra;
        if (ra) {
            if (std::abs(a.kappa.real()) != std::abs(b.kappa.real()))
                return std::abs(a.kappa.real()) < std::abs(b.kappa.real());
            return a.kappa.real() < b.kappa.real();
        }
        if (std::abs(a.kappa.imag()) != std::abs(b.kappa.imag()))
            return std::abs(a.kappa.imag()) < std::abs(b.kappa.imag());
        return a.kappa.real() < b.kappa.real();
    };
    std::stable_sort(left.begin(), left.end(), order);
    std::stable_sort(right.begin(), right.end(), order);
    if (static_cast<int>(left.size()) < N || static_cast<int>(right.size()) < N) {
        throw SolverError("essential strip holds " + std::to_string(left.size()) + " left-going and " +
                          std::to_string(right.size()) + " right-going modes, fewer than N=" + std::to_string(N) +
                          "; increase frak_N (rule of thumb: frak_N = 20 N)");
    }
    s.N = N;
    s.omega = omega;
    s.k2 = k2;
    s.cell_id = mesh->cell_id();
    s.mesh = std::move(mesh);
    s.modes.reserve(2 * N);
    for (int i = 0; i < N; ++i) s.modes.push_back(std::move(left[i]));
    for (int i = 0; i < N; ++i) s.modes.push_back(std::move(right[i]));
    return s;
}

/// Smallest N for which every spectrum's Nth mode on each side is damped by eps relative to the first.
inline int select_N(const std::vector<const BlochSpectrum*>& spectra, double w_min, double eps) {
    if (!(eps > 0.0 && eps < 1.0) && eps != 1.0) throw InputError("select_N: eps must lie in (0, 1]");
    if (!(w_min > 0.0)) throw InputError("select_N: w_min must be positive");
    if (spectra.empty()) throw InputError("select_N: no spectra");
    int avail = spectra.front()->N;
    for (const auto* s : spectra) avail = std::min(avail, s->N);
    for (int N = 1; N <= avail; ++N) {
        bool ok = true;
        for (const auto* s : spectra) {
            const double r1 = s->right(0).kappa.imag(), rN = s->right(N - 1).kappa.imag();
            const double l1 = s->left(0).kappa.imag(), lN = s->left(N - 1).kappa.imag();
            if (std::exp(-rN * w_min) > eps * std::exp(-r1 * w_min) * (1.0 + 1e-12)) ok = false;
            if (std::exp(lN * w_min) > eps * std::exp(l1 * w_min) * (1.0 + 1e-12)) ok = false;
            if (!ok) break;
        }
        if (ok) return N;
    }
    throw SolverError("select_N: no admissible N within the available spectrum of " + std::to_string(avail) +
                      " modes per side");
}

/// Keep the first N modes per side of an already ordered spectrum.
inline BlochSpectrum truncate_spectrum(const BlochSpectrum& s, int N) {
    if (N < 1 || N > s.N) throw InputError("truncate_spectrum: N must lie in 1.." + std::to_string(s.N));
    BlochSpectrum out = s;
    out.modes.clear();
    for (int n = 0; n < N; ++n) out.modes.push_back(s.left(n));
    for (int n = 0; n < N; ++n) out.modes.push_back(s.right(n));
    out.N = N;
    return out;
}

/// Largest relative distance from a non-real eigenvalue to its nearest conjugate (modulo 2 pi/ell).
inline double pairing_defect(const std::vector<cplx>& values, double ell, double tol = 1e-6) {
    const double P = 2.0 * std::numbers::pi / ell;
    double worst = 0.0;
    for (const auto& k : values) {
        if (std::abs(k.imag()) <= tol) continue;
        const cplx c = std::conj(k);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& o : values) {
            const double dr = std::remainder(o.real() - c.real(), P);
            best = std::min(best, std::hypot(dr, o.imag() - c.imag()));
        }
        worst = std::max(worst, best / std::abs(k));
    }
    return worst;
}

/// Number of real eigenvalues in an essential-strip list.
inline int real_count(const std::vector<cplx>& values, double ell) {
    int n = 0;
    for (const auto& k : values)
        if (std::abs(k.imag()) <= tol_im(ell)) ++n;
    return n;
}

inline double injectivity_bound(const UnitCell& cell) {
    return std::numbers::pi / cell.ell() * std::sqrt(cell.G_inf() / cell.rho_sup());
}

/// Folded eigenfunction and its gradient at a cell point.
inline void evaluate_mode(const PeriodicMesh& mesh, const BlochMode& mode, double x, double y, cplx& val,
                          cplx& dx, cplx& dy) {
    const double px = wrap_periodic(x, mesh.ell());
    mesh.evaluate(mode.phi, px, y, val, dx, dy);
    if (mode.fold != 0) {
        const double a = 2.0 * std::numbers::pi * mode.fold / mesh.ell();
        const cplx ph = std::exp(-I_unit * (a * px));
        dx = (dx - I_unit * a * val) * ph;
        dy *= ph;
        val *= ph;
    }
}

/// Cell-averaged Poynting vector (omega/2) Im <G conj(phi) (grad + i k) phi> |amplitude|^2.
inline std::array<double, 2> poynting_average(const PeriodicMesh& mesh, const BlochMode& mode, double k2,
                                              double omega, cplx amplitude = 1.0) {
    const quad::Rule g = quad::gauss_legendre(mesh.order() + 2);
    const cplx kr = mode.kappa_raw(mesh.ell());
    cplx s1 = 0.0, s2 = 0.0;
    const double jac = 0.25 * mesh.hx() * mesh.hy();
    for (int ey = 0; ey < mesh.ny(); ++ey)
        for (int ex = 0; ex < mesh.nx(); ++ex) {
            const double G = mesh.element_material(ex, ey).G;
            for (std::size_t a = 0; a < g.points.size(); ++a)
                for (std::size_t b = 0; b < g.points.size(); ++b) {
                    cplx v, dx, dy;
                    mesh.evaluate_local(mode.phi, ex, ey, g.points[a], g.points[b], v, dx, dy);
                    const double w = g.weights[a] * g.weights[b] * jac * G;
                    s1 += w * std::conj(v) * (dx + I_unit * kr * v);
                    s2 += w * std::conj(v) * (dy + I_unit * k2 * v);
                }
        }
    const double area = mesh.ell() * mesh.d();
    const double scale = 0.5 * omega * std::norm(amplitude) / area;
    return {scale * s1.imag(), scale * s2.imag()};
}

struct SpectrumSettings {
    int N = 9;
    int frak_N = 0;  // 0 selects 20 N
    double h = 0.05;
    int order = 2;
    SolveOptions solve;
};

/// Mesh, assemble, solve and truncate in one call.
inline BlochSpectrum compute_spectrum(const UnitCell& cell, double omega, double k2, const SpectrumSettings& st) {
    auto mesh = std::make_shared<const PeriodicMesh>(mesh_unit_cell(cell, st.h, st.order));
    const QevpMatrices q = assemble_qevp(*mesh, omega, k2);
    SolveOptions so = st.solve;
    so.frak_N = st.frak_N > 0 ? st.frak_N : 20 * st.N;
    const int cap = 2 * static_cast<int>(q.A.rows());
    for (;;) {
        const RawSpectrum raw = solve_spectrum(q, so);
        try {
            return classify_and_truncate(raw, st.N, mesh, omega, k2);
        } catch (const SolverError&) {
            // an explicit frak_N is honoured as given; the default grows until the strip holds N per side
            if (st.frak_N > 0 || so.frak_N >= cap) throw;
            so.frak_N = std::min(cap, 2 * so.frak_N);
        }
    }
}

}  // namespace layercake
