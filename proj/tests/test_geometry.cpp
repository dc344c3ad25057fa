#include <gtest/gtest.h>

#include <cmath>

#include "layercake/geometry.hpp"
#include "layercake/mesh.hpp"

using namespace layercake;

namespace {

CellDescription design_medium_1() {
    CellDescription d;
    d.id = "M1";
    d.background = {0.1, 5.0};
    d.shapes.push_back(Ellipse{0.5, 0.5, 0.3, 0.3, {2.0, 0.5}});
    return d;
}

}  // namespace

TEST(UnitCell, EllipticalInclusionSamplesInsideAndOutside) {
    CellDescription d;
    d.id = "fig5a";
    d.background = {5.0, 0.2};
    d.shapes.push_back(Ellipse{0.5, 0.5, 0.35, 0.2, {1.0, 1.0}});
    const UnitCell c = build_unit_cell(d);
    EXPECT_EQ(c.sample(0.5, 0.5), (Material{1.0, 1.0}));
    EXPECT_EQ(c.sample(0.05, 0.05), (Material{5.0, 0.2}));
    EXPECT_EQ(c.sample(0.8, 0.5), (Material{1.0, 1.0}));
    EXPECT_EQ(c.sample(0.5, 0.75), (Material{5.0, 0.2}));
    EXPECT_DOUBLE_EQ(c.G_inf(), 1.0);
    EXPECT_DOUBLE_EQ(c.G_sup(), 5.0);
    EXPECT_DOUBLE_EQ(c.rho_inf(), 0.2);
    EXPECT_DOUBLE_EQ(c.rho_sup(), 1.0);
}

TEST(UnitCell, NoPrimitivesIsHomogeneous) {
    CellDescription d;
    d.id = "h";
    const UnitCell c = build_unit_cell(d);
    EXPECT_TRUE(c.is_homogeneous());
    for (double x : {0.0, 0.3, 0.999})
        for (double y : {0.0, 0.5, 0.75}) EXPECT_EQ(c.sample(x, y), (Material{1.0, 1.0}));
}

TEST(UnitCell, FullCoverRectangle) {
    CellDescription d;
    d.id = "r";
    d.shapes.push_back(Rectangle{0.5, 0.5, 1.0, 1.0, {2.0, 3.0}});
    const UnitCell c = build_unit_cell(d);
    for (double x : {0.0, 0.25, 0.999})
        for (double y : {0.0, 0.6, 0.999}) EXPECT_EQ(c.sample(x, y), (Material{2.0, 3.0}));
}

TEST(UnitCell, LastPaintedWins) {
    CellDescription d;
    d.id = "o";
    d.shapes.push_back(Rectangle{0.5, 0.5, 0.6, 0.6, {2.0, 2.0}});
    d.shapes.push_back(Ellipse{0.5, 0.5, 0.1, 0.1, {3.0, 4.0}});
    const UnitCell c = build_unit_cell(d);
    EXPECT_EQ(c.sample(0.5, 0.5), (Material{3.0, 4.0}));
    EXPECT_EQ(c.sample(0.3, 0.5), (Material{2.0, 2.0}));
}

TEST(UnitCell, PrimitivesWrapAcrossEdges) {
    CellDescription d;
    d.id = "w";
    d.shapes.push_back(Ellipse{0.0, 0.0, 0.2, 0.2, {2.0, 2.0}});
    const UnitCell c = build_unit_cell(d);
    EXPECT_EQ(c.sample(0.95, 0.95), (Material{2.0, 2.0}));
    EXPECT_EQ(c.sample(0.05, 0.95), (Material{2.0, 2.0}));
    EXPECT_EQ(c.sample(1.05, -0.05), (Material{2.0, 2.0}));
    EXPECT_EQ(c.sample(0.5, 0.5), (Material{1.0, 1.0}));
}

TEST(UnitCell, RejectsInvalidInput) {
    CellDescription d;
    d.id = "bad";
    d.ell = 0.0;
    EXPECT_THROW(build_unit_cell(d), InputError);
    d.ell = 1.0;
    d.d = -1.0;
    EXPECT_THROW(build_unit_cell(d), InputError);
    d.d = 1.0;
    d.background = {0.0, 1.0};
    EXPECT_THROW(build_unit_cell(d), InputError);
    d.background = {1.0, 1.0};
    d.shapes.push_back(Ellipse{0.5, 0.5, 0.2, 0.2, {1.0, -2.0}});
    EXPECT_THROW(build_unit_cell(d), InputError);
}

TEST(Translation, IdentityAndHomogeneous) {
    const UnitCell c = build_unit_cell(design_medium_1());
    const UnitCell t = translate_materials(c, {0.0, 0.0});
    for (double x = 0.0; x < 1.0; x += 0.037)
        for (double y = 0.0; y < 1.0; y += 0.041) EXPECT_EQ(t.sample(x, y), c.sample(x, y));

    CellDescription h;
    h.id = "h";
    h.background = {2.0, 0.7};
    const UnitCell hc = build_unit_cell(h);
    const UnitCell ht = translate_materials(hc, {0.31, 0.77});
    for (double x = 0.0; x < 1.0; x += 0.1) EXPECT_EQ(ht.sample(x, 0.4), hc.sample(x, 0.4));
}

TEST(Translation, SamplesAtShiftedPoint) {
    const UnitCell c = build_unit_cell(design_medium_1());
    const Translation s{0.39, 0.25};
    const UnitCell t = translate_materials(c, s);
    for (double x = 0.0; x < 1.0; x += 0.023)
        for (double y = 0.0; y < 1.0; y += 0.029)
            EXPECT_EQ(t.sample(x, y), c.sample(wrap_periodic(x - s.s1, 1.0), wrap_periodic(y - s.s2, 1.0)));
    EXPECT_NE(t.id(), c.id());
    EXPECT_EQ(t.base_id(), c.id());
}

TEST(Translation, ComposesModuloCell) {
    const UnitCell c = build_unit_cell(design_medium_1());
    const UnitCell a = translate_materials(translate_materials(c, {0.7, 0.6}), {0.5, 0.9});
    const UnitCell b = translate_materials(c, {wrap_periodic(1.2, 1.0), wrap_periodic(1.5, 1.0)});
    EXPECT_NEAR(a.translation().s1, 0.2, 1e-14);
    EXPECT_NEAR(a.translation().s2, 0.5, 1e-14);
    for (double x = 0.01; x < 1.0; x += 0.05)
        for (double y = 0.01; y < 1.0; y += 0.05) EXPECT_EQ(a.sample(x, y), b.sample(x, y));
}

TEST(Mesh, DofCountsAndElementGrid) {
    CellDescription d;
    d.id = "h";
    const UnitCell c = build_unit_cell(d);
    const PeriodicMesh m1 = mesh_unit_cell(c, 0.05, 1);
    EXPECT_EQ(m1.nx(), 20);
    EXPECT_EQ(m1.ny(), 20);
    EXPECT_EQ(m1.dofs(), 400);
    const PeriodicMesh m2 = mesh_unit_cell(c, 0.5, 1);
    EXPECT_EQ(m2.nx(), 2);
    EXPECT_EQ(m2.dofs(), 4);
    const PeriodicMesh m3 = mesh_unit_cell(c, 0.05, 2);
    EXPECT_EQ(m3.dofs(), 1600);
    EXPECT_THROW(mesh_unit_cell(c, 0.6, 1), InputError);
    EXPECT_THROW(mesh_unit_cell(c, 0.0, 1), InputError);
}

TEST(Mesh, PeriodicIdentification) {
    const UnitCell c = build_unit_cell(design_medium_1());
    const PeriodicMesh m = mesh_unit_cell(c, 0.1, 2);
    const int Nx = m.nx() * m.order(), Ny = m.ny() * m.order();
    EXPECT_EQ(m.dof(0, 3), m.dof(Nx, 3));
    EXPECT_EQ(m.dof(2, 0), m.dof(2, Ny));
    EXPECT_EQ(m.dof(0, 0), m.dof(Nx, Ny));
    EXPECT_EQ(m.dof(Nx, 0), m.dof(0, Ny));
    for (int j = 0; j <= Ny; ++j)
        for (int i = 0; i <= Nx; ++i) {
            const int n = m.node_index(i, j);
            EXPECT_EQ(m.periodic_partner_x(m.periodic_partner_x(n)), n);
            EXPECT_EQ(m.periodic_partner_y(m.periodic_partner_y(n)), n);
            EXPECT_EQ(m.node_dof(m.periodic_partner_x(n)), m.node_dof(n));
            EXPECT_EQ(m.node_dof(m.periodic_partner_y(n)), m.node_dof(n));
        }
}

TEST(Mesh, CentroidMaterials) {
    const UnitCell c = build_unit_cell(design_medium_1());
    const PeriodicMesh m = mesh_unit_cell(c, 0.05, 2);
    EXPECT_EQ(m.element_material(10, 10), (Material{2.0, 0.5}));
    EXPECT_EQ(m.element_material(0, 0), (Material{0.1, 5.0}));
}
