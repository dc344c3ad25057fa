#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include "layercake/errors.hpp"

namespace layercake {

struct Material {
    double G = 1.0;    // shear modulus
    double rho = 1.0;  // mass density

    friend bool operator==(const Material&, const Material&) = default;
};

/// Axis-aligned rectangle given by its center and full extents.
struct Rectangle {
    double cx = 0.0, cy = 0.0;
    double wx = 0.0, wy = 0.0;
    Material material;
};

/// Axis-aligned ellipse given by its center and semi-axes.
struct Ellipse {
    double cx = 0.0, cy = 0.0;
    double ax = 0.0, ay = 0.0;
    Material material;
};

using Shape = std::variant<Rectangle, Ellipse>;

/// Reduce x into [0, period).
inline double wrap_periodic(double x, double period) {
    double r = x - period * std::floor(x / period);
    if (r >= period || r < 0.0) r = 0.0;
    return r;
}

/// Offsets of a periodic translation, always stored reduced modulo the cell.
struct Translation {
    double s1 = 0.0;
    double s2 = 0.0;

    friend bool operator==(const Translation&, const Translation&) = default;
};

/// Description of a cell before validation.
struct CellDescription {
    std::string id;
    double ell = 1.0;
    double d = 1.0;
    Material background;
    std::vector<Shape> shapes;
};

/// Rectangular unit cell [0,ell) x [0,d) with piecewise-constant (G, rho) painted in order.
/// Immutable; sampling is periodic in both directions and honours an applied translation.
class UnitCell {
public:
    UnitCell() = default;

    double ell() const noexcept { return ell_; }
    double d() const noexcept { return d_; }
    const std::string& id() const noexcept { return id_; }
    const std::string& base_id() const noexcept { return base_id_; }
    const Material& background() const noexcept { return background_; }
    const std::vector<Shape>& shapes() const noexcept { return shapes_; }
    const Translation& translation() const noexcept { return shift_; }

    /// Material at xi; materials of the untranslated cell are read at xi - s.
    Material sample(double x, double y) const {
        const double px = wrap_periodic(x - shift_.s1, ell_);
        const double py = wrap_periodic(y - shift_.s2, d_);
        for (auto it = shapes_.rbegin(); it != shapes_.rend(); ++it) {
            if (contains(*it, px, py)) {
                return std::visit([](const auto& s) { return s.material; }, *it);
            }
        }
        return background_;
    }

    double G_inf() const { return extreme([](const Material& m) { return m.G; }, true); }
    double G_sup() const { return extreme([](const Material& m) { return m.G; }, false); }
    double rho_inf() const { return extreme([](const Material& m) { return m.rho; }, true); }
    double rho_sup() const { return extreme([](const Material& m) { return m.rho; }, false); }

    bool is_homogeneous() const {
        for (const auto& s : shapes_) {
            if (!(std::visit([](const auto& v) { return v.material; }, s) == background_)) return false;
        }
        return true;
    }

private:
    friend UnitCell build_unit_cell(const CellDescription&);
    friend UnitCell translate_materials(const UnitCell&, Translation);

    bool contains(const Shape& shape, double px, double py) const {
        // test the nine nearest periodic images so primitives wrap across cell edges
        for (int i = -1; i <= 1; ++i) {
            for (int j = -1; j <= 1; ++j) {
                const double x = px + i * ell_;
                const double y = py + j * d_;
                const bool inside = std::visit(
                    [x, y](const auto& s) {
                        using T = std::decay_t<decltype(s)>;
                        if constexpr (std::is_same_v<T, Rectangle>) {
                            return std::abs(x - s.cx) <= 0.5 * s.wx && std::abs(y - s.cy) <= 0.5 * s.wy;
                        } else {
                            const double u = (x - s.cx) / s.ax;
                            const double v = (y - s.cy) / s.ay;
                            return u * u + v * v <= 1.0;
                        }
                    },
                    shape);
                if (inside) return true;
            }
        }
        return false;
    }

    template <class F>
    double extreme(F field, bool lowest) const {
        double v = field(background_);
        for (const auto& s : shapes_) {
            const double w = field(std::visit([](const auto& x) { return x.material; }, s));
            v = lowest ? std::min(v, w) : std::max(v, w);
        }
        return v;
    }

    std::string id_;
    std::string base_id_;
    double ell_ = 1.0;
    double d_ = 1.0;
    Material background_;
    std::vector<Shape> shapes_;
    Translation shift_;
};

inline void validate_material(const Material& m, const std::string& where) {
    if (!(m.G > 0.0) || !(m.rho > 0.0) || !std::isfinite(m.G) || !std::isfinite(m.rho)) {
        throw InputError(where + ": shear modulus and density must be positive");
    }
}

inline UnitCell build_unit_cell(const CellDescription& desc) {
    if (!(desc.ell > 0.0) || !(desc.d > 0.0)) {
        throw InputError("unit cell '" + desc.id + "': dimensions must be positive");
    }
    validate_material(desc.background, "unit cell '" + desc.id + "' background");
    for (const auto& s : desc.shapes) {
        const bool ok = std::visit(
            [](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Rectangle>) return v.wx > 0.0 && v.wy > 0.0;
                else return v.ax > 0.0 && v.ay > 0.0;
            },
            s);
        if (!ok) throw InputError("unit cell '" + desc.id + "': primitive extents must be positive");
        validate_material(std::visit([](const auto& v) { return v.material; }, s),
                          "unit cell '" + desc.id + "' primitive");
    }
    UnitCell cell;
    cell.id_ = desc.id;
    cell.base_id_ = desc.id;
    cell.ell_ = desc.ell;
    cell.d_ = desc.d;
    cell.background_ = desc.background;
    cell.shapes_ = desc.shapes;
    return cell;
}

/// Cell whose materials are those of `cell` shifted by s: G'(xi) = G(xi - s).
inline UnitCell translate_materials(const UnitCell& cell, Translation s) {
    UnitCell out = cell;
    out.shift_.s1 = wrap_periodic(cell.shift_.s1 + s.s1, cell.ell_);
    out.shift_.s2 = wrap_periodic(cell.shift_.s2 + s.s2, cell.d_);
    if (out.shift_.s1 == 0.0 && out.shift_.s2 == 0.0) {
        out.id_ = cell.base_id_;
    } else {
        char buf[96];
        std::snprintf(buf, sizeof buf, "@s=(%.17g,%.17g)", out.shift_.s1, out.shift_.s2);
        out.id_ = cell.base_id_ + buf;
    }
    return out;
}

}  // namespace layercake
