#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "layercake/design.hpp"
#include "layercake/errors.hpp"
#include "layercake/geometry.hpp"
#include "layercake/scatter.hpp"

namespace layercake {

struct StripConfig {
    std::string medium;
    double width = 1.0;
    Translation s;
};

struct SolverConfig {
    std::optional<int> N;  // empty means automatic selection
    int N_probe = 12;
    double eps = 1e-2;
    double w_min = 1.0;
    std::optional<int> M;  // empty means smallest M with 4M+2 >= 2N
    double h = 0.05;
    int order = 2;
    int frak_N = 0;
    double tol_res = 1e-8;
    cplx shift{0.0, 0.1};
    std::uint64_t seed = 0x5eed;
    bool dense = false;
    RankPolicy rank = RankPolicy::Strict;
    double band = 0.0;
    int trace_points = 8;
    bool check_refactorized = true;
};

struct DesignConfig {
    bool present = false;
    std::vector<std::string> media;  // mother media offered to the search; defaults to every medium
    int J = 0;                       // defaults to the cake strip count
    PermutationPolicy policy = PermutationPolicy::WithoutRepetition;
    std::vector<std::vector<std::string>> fixed;
    std::vector<std::array<int, 2>> grids;
    std::vector<std::vector<double>> widths;
    double w_min = 1.0;
    Objective objective;
    std::size_t limit = 0;  // evaluate only the first `limit` candidates when nonzero
};

struct OutputConfig {
    std::string directory = "out";
    std::array<int, 2> field_grid{0, 0};  // points along xi1 and xi2; zero disables
    double field_margin = 0.5;            // half-space extent drawn on either side
    bool poynting = false;
};

struct RunConfig {
    std::vector<CellDescription> media;
    std::vector<StripConfig> strips;
    double G0 = 1.0, rho0 = 1.0;
    double omega = 1.0, theta = 0.0;
    std::optional<double> k2;  // spectrum runs only; overrides the incidence-derived value
    SolverConfig solver;
    DesignConfig design;
    OutputConfig output;
    std::filesystem::path source;

    int medium_index(const std::string& id) const {
        for (std::size_t i = 0; i < media.size(); ++i)
            if (media[i].id == id) return static_cast<int>(i);
        throw ConfigError("unknown medium id '" + id + "'");
    }

    double incidence_k2() const { return omega / std::sqrt(G0 / rho0) * std::sin(theta); }
    double spectrum_k2() const { return k2 ? *k2 : incidence_k2(); }

    LayerCake cake() const {
        LayerCake c;
        c.G0 = G0;
        c.rho0 = rho0;
        c.omega = omega;
        c.theta = theta;
        c.d = media.empty() ? 1.0 : media.front().d;
        for (const auto& s : strips) c.strips.push_back({medium_index(s.medium), s.width, s.s});
        return c;
    }

    SpectrumSettings spectrum_settings(int N) const {
        SpectrumSettings st;
        st.N = N;
        st.frak_N = solver.frak_N;
        st.h = solver.h;
        st.order = solver.order;
        st.solve.shift = solver.shift;
        st.solve.tol_res = solver.tol_res;
        st.solve.seed = solver.seed;
        st.solve.method = solver.dense ? EigenMethod::Dense : EigenMethod::Arnoldi;
        return st;
    }

    ScatterOptions scatter_options() const {
        ScatterOptions so;
        so.rank = solver.rank;
        so.traces.band = solver.band;
        so.traces.points = solver.trace_points;
        so.check_refactorized = solver.check_refactorized;
        return so;
    }
};

/// Smallest M with 4M+2 >= 2N.
inline int default_M(int N) { return std::max(1, (2 * N - 2 + 3) / 4); }

namespace detail {

using nlohmann::json;

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("key '") + key + "': " + e.what());
    }
}

inline Material parse_material(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": material must be an object with G and rho");
    if (!j.contains("G") || !j.contains("rho")) throw ConfigError(where + ": material needs G and rho");
    return {get_or<double>(j, "G", 1.0), get_or<double>(j, "rho", 1.0)};
}

inline Shape parse_shape(const json& j, const std::string& where) {
    const std::string type = get_or<std::string>(j, "type", "");
    const Material m = parse_material(j.contains("material") ? j.at("material") : j, where);
    if (type == "ellipse" || type == "circle") {
        Ellipse e;
        e.cx = get_or<double>(j, "cx", 0.5);
        e.cy = get_or<double>(j, "cy", 0.5);
        if (type == "circle") {
            e.ax = e.ay = get_or<double>(j, "r", 0.0);
        } else {
            e.ax = get_or<double>(j, "ax", 0.0);
            e.ay = get_or<double>(j, "ay", 0.0);
        }
        e.material = m;
        return e;
    }
    if (type == "rectangle") {
        Rectangle r;
        r.cx = get_or<double>(j, "cx", 0.5);
        r.cy = get_or<double>(j, "cy", 0.5);
        r.wx = get_or<double>(j, "wx", 0.0);
        r.wy = get_or<double>(j, "wy", 0.0);
        r.material = m;
        return r;
    }
    throw ConfigError(where + ": unknown shape type '" + type + "'");
}

inline Translation parse_translation(const json& j) {
    if (j.is_null()) return {};
    if (!j.is_array() || j.size() != 2) throw ConfigError("translation must be a two-element array");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline RankPolicy parse_rank(const std::string& s) {
    if (s == "strict") return RankPolicy::Strict;
    if (s == "minimum_norm") return RankPolicy::MinimumNorm;
    throw ConfigError("solver.rank_policy must be 'strict' or 'minimum_norm'");
}

inline PermutationPolicy parse_policy(const std::string& s) {
    if (s == "without_repetition") return PermutationPolicy::WithoutRepetition;
    if (s == "with_repetition") return PermutationPolicy::WithRepetition;
    if (s == "fixed") return PermutationPolicy::Fixed;
    throw ConfigError("design.permutations must be without_repetition, with_repetition or fixed");
}

inline Objective parse_objective(const json& j) {
    Objective o;
    if (j.is_null()) return o;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "min_T") return o;
        if (s == "min_R") {
            o.kind = Objective::Kind::MinR;
            return o;
        }
        throw ConfigError("design.objective must be min_T, min_R or {\"wT\":..,\"wR\":..}");
    }
    o.kind = Objective::Kind::Weighted;
    o.wT = get_or<double>(j, "wT", 1.0);
    o.wR = get_or<double>(j, "wR", 0.0);
    return o;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::get_or;
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config root must be an object");
    if (!j.contains("media") || !j.at("media").is_array()) throw ConfigError("config needs a 'media' array");
    try {
        for (const auto& m : j.at("media")) {
            CellDescription d;
            d.id = get_or<std::string>(m, "id", "");
            if (d.id.empty()) throw ConfigError("every medium needs an id");
            d.ell = get_or<double>(m, "ell", 1.0);
            d.d = get_or<double>(m, "d", 1.0);
            if (!m.contains("background")) throw ConfigError("medium '" + d.id + "' lacks a background");
            d.background = detail::parse_material(m.at("background"), "medium '" + d.id + "' background");
            if (m.contains("shapes"))
                for (const auto& s : m.at("shapes")) d.shapes.push_back(detail::parse_shape(s, "medium '" + d.id + "'"));
            for (const auto& prev : c.media)
                if (prev.id == d.id) throw ConfigError("duplicate medium id '" + d.id + "'");
            c.media.push_back(std::move(d));
        }
        for (const auto& m : c.media)
            if (std::abs(m.d - c.media.front().d) > 1e-12 * m.d) throw ConfigError("all media must share the period d");

        if (j.contains("cake")) {
            const auto& k = j.at("cake");
            c.G0 = get_or<double>(k, "G0", 1.0);
            c.rho0 = get_or<double>(k, "rho0", 1.0);
            c.omega = get_or<double>(k, "omega", 1.0);
            c.theta = get_or<double>(k, "theta", 0.0);
            if (k.contains("k2") && !k.at("k2").is_null()) c.k2 = k.at("k2").get<double>();
            if (k.contains("strips"))
                for (const auto& s : k.at("strips")) {
                    StripConfig sc;
                    sc.medium = get_or<std::string>(s, "medium", "");
                    sc.width = get_or<double>(s, "width", 1.0);
                    if (s.contains("s")) sc.s = detail::parse_translation(s.at("s"));
                    c.strips.push_back(sc);
                }
        }
        if (!(c.G0 > 0.0 && c.rho0 > 0.0)) throw ConfigError("cake.G0 and cake.rho0 must be positive");
        if (!(c.omega > 0.0)) throw ConfigError("cake.omega must be positive");
        if (!(std::abs(c.theta) < std::numbers::pi / 2)) throw ConfigError("cake.theta must lie in (-pi/2, pi/2)");
        for (const auto& s : c.strips) {
            c.medium_index(s.medium);
            if (!(s.width > 0.0)) throw ConfigError("strip widths must be positive");
        }

        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            SolverConfig& v = c.solver;
            if (s.contains("N") && s.at("N").is_string()) {
                if (s.at("N").get<std::string>() != "auto") throw ConfigError("solver.N must be an integer or \"auto\"");
            } else if (s.contains("N")) {
                v.N = s.at("N").get<int>();
            }
            v.N_probe = get_or<int>(s, "N_probe", v.N_probe);
            v.eps = get_or<double>(s, "eps", v.eps);
            v.w_min = get_or<double>(s, "w_min", v.w_min);
            if (s.contains("M") && s.at("M").is_string()) {
                if (s.at("M").get<std::string>() != "auto") throw ConfigError("solver.M must be an integer or \"auto\"");
            } else if (s.contains("M")) {
                v.M = s.at("M").get<int>();
            }
            v.h = get_or<double>(s, "h", v.h);
            v.order = get_or<int>(s, "order", v.order);
            v.frak_N = get_or<int>(s, "frak_N", v.frak_N);
            v.tol_res = get_or<double>(s, "tol_res", v.tol_res);
            if (s.contains("shift")) {
                const auto& z = s.at("shift");
                if (!z.is_array() || z.size() != 2) throw ConfigError("solver.shift must be [re, im]");
                v.shift = {z[0].get<double>(), z[1].get<double>()};
            }
            v.seed = get_or<std::uint64_t>(s, "seed", v.seed);
            v.dense = get_or<bool>(s, "dense", v.dense);
            v.rank = detail::parse_rank(get_or<std::string>(s, "rank_policy", "strict"));
            v.band = get_or<double>(s, "band", v.band);
            v.trace_points = get_or<int>(s, "trace_points", v.trace_points);
            v.check_refactorized = get_or<bool>(s, "check_refactorized", v.check_refactorized);
        }
        const SolverConfig& v = c.solver;
        if (v.N && *v.N < 1) throw ConfigError("solver.N must be >= 1");
        if (!v.N) {
            if (!(v.eps > 0.0 && v.eps < 1.0)) throw ConfigError("automatic N needs solver.eps in (0, 1)");
            if (!(v.w_min > 0.0)) throw ConfigError("automatic N needs solver.w_min > 0");
            if (v.N_probe < 1) throw ConfigError("solver.N_probe must be >= 1");
        }
        if (v.M && *v.M < 0) throw ConfigError("solver.M must be >= 0");
        if (!(v.h > 0.0)) throw ConfigError("solver.h must be positive");
        if (v.order < 1 || v.order > 3) throw ConfigError("solver.order must be 1, 2 or 3");
        if (v.trace_points < 1) throw ConfigError("solver.trace_points must be >= 1");

        if (j.contains("design")) {
            const auto& s = j.at("design");
            DesignConfig& dc = c.design;
            dc.present = true;
            if (s.contains("media")) dc.media = s.at("media").get<std::vector<std::string>>();
            if (dc.media.empty())
                for (const auto& m : c.media) dc.media.push_back(m.id);
            for (const auto& id : dc.media) c.medium_index(id);
            dc.J = get_or<int>(s, "J", static_cast<int>(c.strips.size()));
            dc.policy = detail::parse_policy(get_or<std::string>(s, "permutations", "without_repetition"));
            if (s.contains("fixed")) dc.fixed = s.at("fixed").get<std::vector<std::vector<std::string>>>();
            if (dc.policy == PermutationPolicy::Fixed && dc.fixed.empty()) {
                std::vector<std::string> row;
                for (const auto& st : c.strips) row.push_back(st.medium);
                dc.fixed.push_back(row);
            }
            if (s.contains("grids")) {
                const auto& g = s.at("grids");
                if (g.is_array() && g.size() == 2 && g[0].is_number()) {
                    dc.grids.assign(dc.J, {g[0].get<int>(), g[1].get<int>()});
                } else {
                    for (const auto& e : g) dc.grids.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
                }
            }
            if (s.contains("widths")) dc.widths = s.at("widths").get<std::vector<std::vector<double>>>();
            dc.w_min = get_or<double>(s, "w_min", dc.w_min);
            dc.objective = detail::parse_objective(s.contains("objective") ? s.at("objective") : nlohmann::json());
            dc.limit = get_or<std::size_t>(s, "limit", 0);
            if (dc.J < 1) throw ConfigError("design.J must be >= 1");
        }

        if (j.contains("output")) {
            const auto& o = j.at("output");
            c.output.directory = get_or<std::string>(o, "directory", c.output.directory);
            if (o.contains("field_grid")) {
                const auto& g = o.at("field_grid");
                c.output.field_grid = {g.at(0).get<int>(), g.at(1).get<int>()};
            }
            c.output.field_margin = get_or<double>(o, "field_margin", c.output.field_margin);
            c.output.poynting = get_or<bool>(o, "poynting", c.output.poynting);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    RunConfig c = parse_config(j);
    c.source = path;
    return c;
}

/// Design space over the configured media, with medium ids mapped to positions in `design.media`.
inline DesignSpace design_space(const RunConfig& c) {
    DesignSpace s;
    const DesignConfig& dc = c.design;
    s.Q = static_cast<int>(dc.media.size());
    s.J = dc.J;
    s.policy = dc.policy;
    auto local = [&](const std::string& id) {
        for (std::size_t i = 0; i < dc.media.size(); ++i)
            if (dc.media[i] == id) return static_cast<int>(i);
        throw ConfigError("design.fixed references medium '" + id + "' outside design.media");
    };
    for (const auto& row : dc.fixed) {
        std::vector<int> p;
        for (const auto& id : row) p.push_back(local(id));
        s.fixed.push_back(p);
    }
    s.grids = dc.grids;
    s.widths = dc.widths;
    s.w_min = dc.w_min;
    if (!c.media.empty()) {
        s.ell = c.media[c.medium_index(dc.media.front())].ell;
        s.d = c.media.front().d;
    }
    try {
        validate_space(s);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

namespace detail {

inline nlohmann::json material_json(const Material& m) { return {{"G", m.G}, {"rho", m.rho}}; }

}  // namespace detail

/// Serialize back to the accepted document shape.
inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    json media = json::array();
    for (const auto& m : c.media) {
        json shapes = json::array();
        for (const auto& s : m.shapes) {
            if (const auto* e = std::get_if<Ellipse>(&s))
                shapes.push_back({{"type", "ellipse"}, {"cx", e->cx}, {"cy", e->cy}, {"ax", e->ax}, {"ay", e->ay},
                                  {"material", detail::material_json(e->material)}});
            else if (const auto* r = std::get_if<Rectangle>(&s))
                shapes.push_back({{"type", "rectangle"}, {"cx", r->cx}, {"cy", r->cy}, {"wx", r->wx}, {"wy", r->wy},
                                  {"material", detail::material_json(r->material)}});
        }
        media.push_back({{"id", m.id}, {"ell", m.ell}, {"d", m.d}, {"background", detail::material_json(m.background)},
                         {"shapes", shapes}});
    }
    json strips = json::array();
    for (const auto& s : c.strips)
        strips.push_back({{"medium", s.medium}, {"width", s.width}, {"s", {s.s.s1, s.s.s2}}});
    json cake = {{"G0", c.G0}, {"rho0", c.rho0}, {"omega", c.omega}, {"theta", c.theta}, {"strips", strips}};
    if (c.k2) cake["k2"] = *c.k2;
    const SolverConfig& v = c.solver;
    json solver = {{"N_probe", v.N_probe},
                   {"eps", v.eps},
                   {"w_min", v.w_min},
                   {"h", v.h},
                   {"order", v.order},
                   {"frak_N", v.frak_N},
                   {"tol_res", v.tol_res},
                   {"shift", {v.shift.real(), v.shift.imag()}},
                   {"seed", v.seed},
                   {"dense", v.dense},
                   {"rank_policy", v.rank == RankPolicy::Strict ? "strict" : "minimum_norm"},
                   {"band", v.band},
                   {"trace_points", v.trace_points},
                   {"check_refactorized", v.check_refactorized}};
    solver["N"] = v.N ? json(*v.N) : json("auto");
    solver["M"] = v.M ? json(*v.M) : json("auto");
    json out = {{"directory", c.output.directory},
                {"field_grid", {c.output.field_grid[0], c.output.field_grid[1]}},
                {"field_margin", c.output.field_margin},
                {"poynting", c.output.poynting}};
    return {{"media", media}, {"cake", cake}, {"solver", solver}, {"output", out}};
}

}  // namespace layercake
