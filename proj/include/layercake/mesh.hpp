#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "layercake/errors.hpp"
#include "layercake/geometry.hpp"
#include "layercake/quadrature.hpp"

namespace layercake {

/// Structured periodic Q_p mesh on [0,ell) x [0,d). Node (i,j) with 0 <= i <= nx*p,
/// 0 <= j <= ny*p; nodes on opposite edges share one DOF.
class PeriodicMesh {
public:
    double ell() const noexcept { return ell_; }
    double d() const noexcept { return d_; }
    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    int order() const noexcept { return p_; }
    double hx() const noexcept { return ell_ / nx_; }
    double hy() const noexcept { return d_ / ny_; }
    int elements() const noexcept { return nx_ * ny_; }
    int dofs() const noexcept { return nx_ * p_ * ny_ * p_; }
    int node_cols() const noexcept { return nx_ * p_ + 1; }
    int node_rows() const noexcept { return ny_ * p_ + 1; }
    int nodes() const noexcept { return node_cols() * node_rows(); }
    const std::vector<double>& local_nodes() const noexcept { return ref_; }
    const std::string& cell_id() const noexcept { return cell_id_; }

    /// Unique DOF of node (i, j) after periodic identification.
    int dof(int i, int j) const noexcept {
        const int Nx = nx_ * p_;
        const int Ny = ny_ * p_;
        return ((i % Nx + Nx) % Nx) + Nx * ((j % Ny + Ny) % Ny);
    }

    int node_index(int i, int j) const noexcept { return i + node_cols() * j; }

    std::array<double, 2> node_coords(int i, int j) const {
        const int ex = std::min(i / p_, nx_ - 1);
        const int ey = std::min(j / p_, ny_ - 1);
        return {hx() * (ex + 0.5 * (ref_[i - ex * p_] + 1.0)), hy() * (ey + 0.5 * (ref_[j - ey * p_] + 1.0))};
    }

    /// Left/right partner: node on xi1 = 0 maps to xi1 = ell and back, others unchanged.
    int periodic_partner_x(int node) const noexcept {
        const int i = node % node_cols();
        const int j = node / node_cols();
        if (i == 0) return node_index(node_cols() - 1, j);
        if (i == node_cols() - 1) return node_index(0, j);
        return node;
    }

    /// Bottom/top partner.
    int periodic_partner_y(int node) const noexcept {
        const int i = node % node_cols();
        const int j = node / node_cols();
        if (j == 0) return node_index(i, node_rows() - 1);
        if (j == node_rows() - 1) return node_index(i, 0);
        return node;
    }

    int node_dof(int node) const noexcept { return dof(node % node_cols(), node / node_cols()); }

    /// DOFs of element (ex, ey) in local order a + (p+1) b.
    void element_dofs(int ex, int ey, int* out) const noexcept {
        for (int b = 0; b <= p_; ++b)
            for (int a = 0; a <= p_; ++a) out[a + (p_ + 1) * b] = dof(ex * p_ + a, ey * p_ + b);
    }

    const Material& element_material(int ex, int ey) const noexcept { return mats_[ex + nx_ * ey]; }

    /// x-coordinate of element column boundaries, k = 0..nx.
    double x_break(int k) const noexcept { return ell_ * k / nx_; }
    double y_break(int k) const noexcept { return d_ * k / ny_; }

    /// Locate wrapped point: element indices and reference coordinates in [-1, 1].
    void locate(double x, double y, int& ex, int& ey, double& tx, double& ty) const noexcept {
        const double px = wrap_periodic(x, ell_) / hx();
        const double py = wrap_periodic(y, d_) / hy();
        ex = std::min(static_cast<int>(std::floor(px)), nx_ - 1);
        ey = std::min(static_cast<int>(std::floor(py)), ny_ - 1);
        tx = 2.0 * (px - ex) - 1.0;
        ty = 2.0 * (py - ey) - 1.0;
    }

    /// Value and gradient of a nodal field at (x, y); periodic wrap applied.
    template <class Vec>
    void evaluate(const Vec& u, double x, double y, std::complex<double>& val, std::complex<double>& dx,
                  std::complex<double>& dy) const {
        int ex, ey;
        double tx, ty;
        locate(x, y, ex, ey, tx, ty);
        evaluate_local(u, ex, ey, tx, ty, val, dx, dy);
    }

    template <class Vec>
    void evaluate_local(const Vec& u, int ex, int ey, double tx, double ty, std::complex<double>& val,
                        std::complex<double>& dx, std::complex<double>& dy) const {
        double lx[4], dlx[4], ly[4], dly[4];
        quad::lagrange(ref_, tx, lx, dlx);
        quad::lagrange(ref_, ty, ly, dly);
        const double sx = 2.0 / hx();
        const double sy = 2.0 / hy();
        val = dx = dy = 0.0;
        for (int b = 0; b <= p_; ++b) {
            for (int a = 0; a <= p_; ++a) {
                const std::complex<double> c = u[dof(ex * p_ + a, ey * p_ + b)];
                val += c * (lx[a] * ly[b]);
                dx += c * (dlx[a] * sx * ly[b]);
                dy += c * (lx[a] * dly[b] * sy);
            }
        }
    }

private:
    friend PeriodicMesh mesh_unit_cell(const UnitCell&, double, int);

    double ell_ = 1.0, d_ = 1.0;
    int nx_ = 0, ny_ = 0, p_ = 1;
    std::vector<double> ref_;
    std::vector<Material> mats_;
    std::string cell_id_;
};

inline PeriodicMesh mesh_unit_cell(const UnitCell& cell, double h, int p) {
    if (!(h > 0.0) || h > 0.5 * std::min(cell.ell(), cell.d()) * (1.0 + 1e-12)) {
        throw InputError("mesh size h must satisfy 0 < h <= min(ell, d)/2");
    }
    if (p < 1 || p > 3) throw InputError("element order must be 1, 2 or 3");
    PeriodicMesh m;
    m.ell_ = cell.ell();
    m.d_ = cell.d();
    m.nx_ = std::max(2, static_cast<int>(std::ceil(cell.ell() / h - 1e-9)));
    m.ny_ = std::max(2, static_cast<int>(std::ceil(cell.d() / h - 1e-9)));
    m.p_ = p;
    m.ref_ = quad::lobatto_nodes(p);
    m.cell_id_ = cell.id();
    m.mats_.resize(static_cast<std::size_t>(m.nx_) * m.ny_);
    for (int ey = 0; ey < m.ny_; ++ey)
        for (int ex = 0; ex < m.nx_; ++ex)
            m.mats_[ex + m.nx_ * ey] = cell.sample((ex + 0.5) * m.hx(), (ey + 0.5) * m.hy());
    return m;
}

}  // namespace layercake
