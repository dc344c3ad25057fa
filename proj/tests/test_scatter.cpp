#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "layercake/oracle.hpp"
#include "layercake/scatter.hpp"

using namespace layercake;

namespace {

UnitCell homogeneous(double G, double rho, const std::string& id) {
    CellDescription d;
    d.id = id;
    d.background = {G, rho};
    return build_unit_cell(d);
}

UnitCell medium(const std::string& id, Material inc, Material bg, double r) {
    CellDescription d;
    d.id = id;
    d.background = bg;
    d.shapes.push_back(Ellipse{0.5, 0.5, r, r, inc});
    return build_unit_cell(d);
}

BlochSpectrum spectrum(const UnitCell& c, const LayerCake& cake, int N, double h = 0.1) {
    SpectrumSettings st;
    st.N = N;
    st.h = h;
    return compute_spectrum(c, cake.omega, cake.k2(), st);
}

LayerCake make_cake(double omega, double theta, std::vector<Strip> strips) {
    LayerCake c;
    c.omega = omega;
    c.theta = theta;
    c.strips = std::move(strips);
    return c;
}

// exact plane-wave modal data of a homogeneous strip; the folded envelope is
// exp(-i 2 pi q xi1) exp(i 2 pi m xi2) and the stress trace carries the unfolded wavenumber
StripModal analytic_strip(double G, double rho, double w, const LayerCake& cake, int N, int M) {
    const auto hs = oracle::homogeneous_spectrum(G, rho, 1.0, 1.0, cake.omega, cake.k2(), N);
    std::vector<oracle::PlaneMode> all(hs.left);
    all.insert(all.end(), hs.right.begin(), hs.right.end());
    std::vector<cplx> kl, kr, raw;
    std::vector<int> harm;
    for (const auto& m : hs.left) kl.push_back(m.kappa);
    for (const auto& m : hs.right) kr.push_back(m.kappa);
    for (const auto& m : all) {
        raw.push_back(m.kappa - 2.0 * std::numbers::pi * m.fold);
        harm.push_back(m.harmonic);
    }
    StripModal sm;
    sm.N = N;
    sm.at_left = analytic_lambda(raw, harm, G, 1.0, M, 0.0);
    sm.at_right = analytic_lambda(raw, harm, G, 1.0, M, w);
    for (std::size_t n = 0; n < all.size(); ++n)
        sm.at_right.values.col(n) *= std::exp(cplx(0.0, -2.0 * std::numbers::pi * all[n].fold * w));
    sm.exp = exp_block(kl, kr, w);
    return sm;
}

}  // namespace

TEST(Scatter, EmptyScattererPassesThrough) {
    const UnitCell u = homogeneous(1.0, 1.0, "u");
    LayerCake cake = make_cake(2.0, 0.3, {{0, 1.0, {}}, {0, 1.5, {0.2, 0.4}}});
    const BlochSpectrum s = spectrum(u, cake, 4);
    const ScatteringSolution sol = solve_scattering(cake, {&s}, 2);
    EXPECT_NEAR(sol.T_coeff, 1.0, 1e-8);
    EXPECT_NEAR(sol.R_coeff, 0.0, 1e-8);
    EXPECT_LE(std::abs(sol.delta), 1e-8);
    EXPECT_NEAR(std::abs(sol.t[2]), 1.0, 1e-8);  // phase referenced at the right face
    for (double x : {-0.7, 0.3, 1.2, 2.4, 3.1})
        for (double y : {0.1, 0.77}) {
            const cplx want = std::exp(cplx(0.0, cake.k1() * x + cake.k2() * y));
            const cplx got = reconstruct_field(sol, cake, {&s}, {{x, y}})[0];
            EXPECT_NEAR(std::abs(got - want), 0.0, 1e-8) << x << " " << y;
        }
    const auto cells = cell_poynting_map(sol, cake, {&s});
    ASSERT_EQ(cells.size(), 3u);
    for (const auto& c : cells) {
        EXPECT_NEAR(c.P1, 0.5 * cake.omega * cake.k1(), 1e-6);
        EXPECT_NEAR(c.P2, 0.5 * cake.omega * cake.k2(), 1e-6);
    }
}

TEST(Scatter, NoStripsIsIdentity) {
    const UnitCell u = homogeneous(1.0, 1.0, "u");
    LayerCake cake = make_cake(1.5, 0.0, {});
    const ScatteringSolution sol = solve_scattering(cake, {}, 1);
    EXPECT_DOUBLE_EQ(sol.T_coeff, 1.0);
    EXPECT_DOUBLE_EQ(sol.R_coeff, 0.0);
}

TEST(Scatter, FresnelFirstInterface) {
    const UnitCell slab = homogeneous(2.0, 1.0, "slab");
    LayerCake cake = make_cake(2.0, 0.0, {{0, 1.0, {}}});
    const BlochSpectrum s = spectrum(slab, cake, 1);
    const HalfspaceModal half = halfspace_modal(2.0, 0.0, 0, 1.0, 1.0);
    const StripModal sm = strip_modal(s, cake.strips[0], 0);
    const InterfaceRT rt = interface_rt_first(half, sm.at_left, sm.exp);
    const double Z1 = 1.0, Z2 = std::sqrt(2.0);
    EXPECT_NEAR(rt.R_right(0, 0).real(), (Z1 - Z2) / (Z1 + Z2), 1e-6);
    EXPECT_NEAR(rt.R_right(0, 0).real(), -0.1716, 1e-4);
    EXPECT_NEAR(std::abs(rt.T_right(0, 0)), 2 * Z1 / (Z1 + Z2), 1e-6);
}

TEST(Scatter, MatchedMediumHasNoReflection) {
    LayerCake cake = make_cake(2.0, 0.0, {{0, 1.0, {}}});
    const HalfspaceModal half = halfspace_modal(2.0, 0.0, 1, 1.0, 1.0);
    const StripModal sm = analytic_strip(1.0, 1.0, 1.0, cake, 3, 1);
    const InterfaceRT rt = interface_rt_first(half, sm.at_left, sm.exp);
    EXPECT_LE(rt.R_right.norm(), 1e-8);
    const CVec inc = CVec::Unit(3, 1);
    const CVec beta = rt.T_right * inc;
    EXPECT_NEAR(std::abs(beta[0] - 1.0), 0.0, 1e-8);
    EXPECT_LE(beta.tail(2).norm(), 1e-8);
}

TEST(Scatter, SingleModePassThroughIsIdentity) {
    const UnitCell u = homogeneous(1.0, 1.0, "u");
    LayerCake cake = make_cake(2.0, 0.0, {{0, 1.0, {}}});
    const BlochSpectrum s = spectrum(u, cake, 1);
    const HalfspaceModal half = halfspace_modal(2.0, 0.0, 0, 1.0, 1.0);
    const StripModal sm = strip_modal(s, cake.strips[0], 0);
    const InterfaceRT rt = interface_rt_first(half, sm.at_left, sm.exp);
    EXPECT_NEAR(std::abs(rt.T_right(0, 0) - 1.0), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(rt.T_left(0, 0)), 1.0, 1e-8);
    EXPECT_LE(std::abs(rt.R_left(0, 0)), 1e-8);
    EXPECT_LE(std::abs(rt.R_right(0, 0)), 1e-8);
}

TEST(Scatter, HomogeneousSlabMatchesOracle) {
    const UnitCell slab = homogeneous(2.0, 1.0, "slab");
    LayerCake cake = make_cake(2.0, 0.0, {{0, 1.0, {}}});
    const BlochSpectrum s = spectrum(slab, cake, 1, 0.05);
    const ScatteringSolution sol = solve_scattering(cake, {&s}, 0);
    EXPECT_NEAR(std::abs(sol.t[0]), 0.9441, 1e-3);
    EXPECT_NEAR(std::abs(sol.r[0]), 0.3297, 1e-3);
    oracle::HomoStack hs;
    hs.omega = 2.0;
    hs.layers.push_back({2.0, 1.0, 1.0});
    const oracle::RT o = oracle::layered_1d_rt(hs);
    EXPECT_NEAR(std::abs(sol.t[0] - o.t), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(sol.r[0] - o.r), 0.0, 1e-6);
    EXPECT_LE(std::abs(sol.delta), 1e-10);
}

TEST(Scatter, XiTwoIndependentStackDecouples) {
    const double G[3] = {2.0, 0.5, 3.0}, rho[3] = {1.0, 1.5, 0.7}, w[3] = {0.8, 1.3, 0.6};
    LayerCake cake = make_cake(2.2, 0.35, {});
    const int N = 5, M = 2;
    std::vector<StripModal> sm;
    oracle::HomoStack hs;
    hs.omega = cake.omega;
    hs.theta = cake.theta;
    for (int j = 0; j < 3; ++j) {
        sm.push_back(analytic_strip(G[j], rho[j], w[j], cake, N, M));
        hs.layers.push_back({G[j], rho[j], w[j]});
    }
    const HalfspaceModal half = halfspace_modal(cake.omega, cake.k2(), M, 1.0, 1.0);
    const ScatteringSolution sol = solve_from_modal(half, sm);
    const oracle::RT o = oracle::layered_1d_rt(hs);
    for (int m = -M; m <= M; ++m) {
        if (m == 0) continue;
        EXPECT_LE(std::abs(sol.r[m + M]), 1e-8);
        EXPECT_LE(std::abs(sol.t[m + M]), 1e-8);
    }
    EXPECT_LE(std::abs(sol.r[M] - o.r), 1e-6 * std::abs(o.r));
    EXPECT_LE(std::abs(sol.t[M] - o.t), 1e-6 * std::abs(o.t));
    EXPECT_LE(sol.refactorized_mismatch, 1e-8);
}

TEST(Scatter, FictitiousInternalInterface) {
    const UnitCell m1 = medium("M1", {2.0, 0.5}, {0.1, 5.0}, 0.3);
    LayerCake cake = make_cake(1.2, 0.0, {{0, 1.0, {}}, {0, 1.0, {}}});
    const BlochSpectrum s = spectrum(m1, cake, 4);
    const StripModal a = strip_modal(s, cake.strips[0], 2);
    const StripModal b = strip_modal(s, cake.strips[1], 2);
    const InterfaceRT rt = interface_rt_internal(a.at_right, b.at_left, a.exp, b.exp);
    const CMat Er = a.exp.right.asDiagonal();
    const CMat El = b.exp.left.asDiagonal();
    EXPECT_LE((rt.T_right - Er).norm(), 1e-8);
    EXPECT_LE((rt.T_left - El).norm(), 1e-8);
    EXPECT_LE(rt.R_left.norm(), 1e-8);
    EXPECT_LE(rt.R_right.norm(), 1e-8);
}

TEST(Scatter, MirroredInterfaceSwapsRoles) {
    const UnitCell m1 = medium("M1", {2.0, 0.5}, {0.1, 5.0}, 0.3);
    const UnitCell m2 = medium("M2", {1.0, 2.0}, {2.0, 5.0}, 0.3);
    LayerCake cake = make_cake(1.2, 0.0, {{0, 1.0, {}}, {1, 1.0, {}}});
    const BlochSpectrum s1 = spectrum(m1, cake, 4), s2 = spectrum(m2, cake, 4);
    const StripModal a = strip_modal(s1, cake.strips[0], 2);
    const StripModal b = strip_modal(s2, cake.strips[1], 2);
    // exchanging the two sides with left and right mode families swapped
    auto swap_cols = [](const LambdaBlock& l, int N) {
        LambdaBlock o = l;
        o.values << l.values.rightCols(N), l.values.leftCols(N);
        return o;
    };
    auto swap_exp = [](const ExpBlock& e) {
        ExpBlock o = e;
        o.left = e.right;
        o.right = e.left;
        return o;
    };
    const InterfaceRT f = interface_rt_internal(a.at_right, b.at_left, a.exp, b.exp);
    const InterfaceRT g = interface_rt_internal(swap_cols(b.at_left, 4), swap_cols(a.at_right, 4), swap_exp(b.exp),
                                                swap_exp(a.exp));
    EXPECT_LE((f.T_right - g.T_left).norm(), 1e-9 * f.T_right.norm());
    EXPECT_LE((f.T_left - g.T_right).norm(), 1e-9 * f.T_left.norm());
    EXPECT_LE((f.R_left - g.R_right).norm(), 1e-9 * std::max(1.0, f.R_left.norm()));
    EXPECT_LE((f.R_right - g.R_left).norm(), 1e-9 * std::max(1.0, f.R_right.norm()));
}

TEST(Scatter, SweepsAgreeAndEnergyBalances) {
    const UnitCell m1 = medium("M1", {2.0, 0.5}, {0.1, 5.0}, 0.3);
    const UnitCell m2 = medium("M2", {1.0, 2.0}, {2.0, 5.0}, 0.3);
    LayerCake cake = make_cake(1.2, 0.0, {{0, 1.0, {}}, {1, 1.0, {}}, {0, 2.0, {}}});
    const BlochSpectrum s1 = spectrum(m1, cake, 9), s2 = spectrum(m2, cake, 9);
    ScatterOptions opt;
    opt.rank = RankPolicy::MinimumNorm;
    const ScatteringSolution sol = solve_scattering(cake, {&s1, &s2}, 4, opt);
    EXPECT_LE(sol.refactorized_mismatch, 1e-8);
    EXPECT_LE(std::abs(sol.delta), 1e-2);
    const auto flux = halfspace_fluxes(sol, cake);
    EXPECT_NEAR(flux[0], flux[1], 1e-2 * flux[0] + 1e-12);
}

TEST(Scatter, ScalingNeutrality) {
    const UnitCell m1 = medium("M1", {2.0, 0.5}, {0.1, 5.0}, 0.3);
    const UnitCell m2 = medium("M2", {1.0, 2.0}, {2.0, 5.0}, 0.3);
    LayerCake cake = make_cake(1.2, 0.2, {{0, 1.0, {}}, {1, 1.0, {0.3, 0.1}}});
    const BlochSpectrum s1 = spectrum(m1, cake, 4), s2 = spectrum(m2, cake, 4);
    BlochSpectrum t1 = s1, t2 = s2;
    for (std::size_t n = 0; n < t1.modes.size(); ++n) t1.modes[n].phi *= cplx(0.3 + n, -1.7 + 0.2 * n);
    for (std::size_t n = 0; n < t2.modes.size(); ++n) t2.modes[n].phi *= cplx(-2.0, 0.5 * n + 0.1);
    const ScatteringSolution a = solve_scattering(cake, {&s1, &s2}, 2);
    const ScatteringSolution b = solve_scattering(cake, {&t1, &t2}, 2);
    EXPECT_LE((a.r - b.r).norm(), 1e-10 * a.r.norm());
    EXPECT_LE((a.t - b.t).norm(), 1e-10 * a.t.norm());
}

TEST(Scatter, FieldContinuousAcrossInterfaces) {
    const UnitCell m1 = medium("M1", {2.0, 0.5}, {0.1, 5.0}, 0.3);
    const UnitCell m2 = medium("M2", {1.0, 2.0}, {2.0, 5.0}, 0.3);
    LayerCake cake = make_cake(1.2, 0.0, {{0, 1.0, {}}, {1, 1.0, {}}});
    const BlochSpectrum s1 = spectrum(m1, cake, 6), s2 = spectrum(m2, cake, 6);
    const std::vector<const BlochSpectrum*> sp{&s1, &s2};
    const ScatteringSolution sol = solve_scattering(cake, sp, 3, {{}, RankPolicy::MinimumNorm, true});
    double umax = 0.0, jump = 0.0;
    for (double y = 0.05; y < 1.0; y += 0.1) {
        const cplx a = halfspace_field(sol, cake, -1e-12, y).u;
        const cplx b = strip_field(sol, cake, s1, 0, 0.0, y).u;
        const cplx c = strip_field(sol, cake, s1, 0, 1.0, y).u;
        const cplx d = strip_field(sol, cake, s2, 1, 0.0, y).u;
        const cplx e = strip_field(sol, cake, s2, 1, 1.0, y).u;
        const cplx f = halfspace_field(sol, cake, 2.0, y).u;
        umax = std::max({umax, std::abs(a), std::abs(c), std::abs(e)});
        jump = std::max({jump, std::abs(a - b), std::abs(c - d), std::abs(e - f)});
    }
    EXPECT_LT(jump, 0.05 * umax);
}

TEST(Scatter, RejectsMismatchedFrequency) {
    const UnitCell u = homogeneous(1.0, 1.0, "u");
    LayerCake cake = make_cake(2.0, 0.0, {{0, 1.0, {}}});
    const BlochSpectrum s = spectrum(u, cake, 2);
    cake.omega = 2.5;
    EXPECT_THROW(solve_scattering(cake, {&s}, 1), InputError);
    cake.omega = 2.0;
    EXPECT_THROW(solve_scattering(cake, {nullptr}, 1), InputError);
}
