#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "layercake/cache.hpp"
#include "layercake/scatter.hpp"

namespace layercake {

enum class PermutationPolicy { WithoutRepetition, WithRepetition, Fixed };

struct DesignSpace {
    int Q = 1;  // number of mother media, ids 0..Q-1
    int J = 1;  // strips
    PermutationPolicy policy = PermutationPolicy::WithoutRepetition;
    std::vector<std::vector<int>> fixed;          // used with PermutationPolicy::Fixed
    std::vector<std::array<int, 2>> grids;        // per strip (n1, n2); empty means {1, 1}
    std::vector<std::vector<double>> widths;      // per strip; empty means {ell}
    double ell = 1.0, d = 1.0;
    double w_min = 1.0;
};

inline void validate_space(const DesignSpace& s) {
    if (s.Q < 1 || s.J < 1) throw InputError("design space: Q and J must be >= 1");
    if (s.policy == PermutationPolicy::WithoutRepetition && s.J > s.Q)
        throw InputError("design space: permutations without repetition need J <= Q");
    if (!(s.w_min > 0.0)) throw InputError("design space: w_min must be positive");
    if (!s.grids.empty() && static_cast<int>(s.grids.size()) != s.J)
        throw InputError("design space: one translation grid per strip");
    for (const auto& g : s.grids)
        if (g[0] < 1 || g[1] < 1) throw InputError("design space: translation grid sizes must be >= 1");
    if (!s.widths.empty() && static_cast<int>(s.widths.size()) != s.J)
        throw InputError("design space: one width list per strip");
    for (const auto& ws : s.widths) {
        if (ws.empty()) throw InputError("design space: empty width list");
        for (double w : ws)
            if (w < s.w_min) throw InputError("design space: width below w_min");
    }
    if (s.policy == PermutationPolicy::Fixed) {
        if (s.fixed.empty()) throw InputError("design space: fixed policy needs at least one permutation");
        for (const auto& p : s.fixed) {
            if (static_cast<int>(p.size()) != s.J) throw InputError("design space: permutation length differs from J");
            for (int m : p)
                if (m < 0 || m >= s.Q) throw InputError("design space: medium index out of range");
        }
    }
}

inline std::vector<std::vector<int>> permutations(const DesignSpace& s) {
    std::vector<std::vector<int>> out;
    if (s.policy == PermutationPolicy::Fixed) return s.fixed;
    std::vector<int> cur(s.J, 0);
    std::function<void(int)> rec = [&](int pos) {
        if (pos == s.J) {
            out.push_back(cur);
            return;
        }
        for (int m = 0; m < s.Q; ++m) {
            if (s.policy == PermutationPolicy::WithoutRepetition &&
                std::find(cur.begin(), cur.begin() + pos, m) != cur.begin() + pos)
                continue;
            cur[pos] = m;
            rec(pos + 1);
        }
    };
    rec(0);
    return out;
}

/// Deterministic index-addressed enumeration: permutations outermost, then per-strip
/// translation grids (strip 1 slowest, s1 before s2), then per-strip widths.
class CandidateStream {
public:
    explicit CandidateStream(DesignSpace space) : s_(std::move(space)) {
        validate_space(s_);
        perms_ = permutations(s_);
        std::size_t t = 1, w = 1;
        for (int j = 0; j < s_.J; ++j) {
            t *= static_cast<std::size_t>(grid(j)[0]) * grid(j)[1];
            w *= widths(j).size();
        }
        per_perm_ = t * w;
        width_count_ = w;
    }

    std::size_t size() const noexcept { return perms_.size() * per_perm_; }
    const DesignSpace& space() const noexcept { return s_; }

    std::array<int, 2> grid(int j) const { return s_.grids.empty() ? std::array<int, 2>{1, 1} : s_.grids[j]; }
    std::vector<double> widths(int j) const { return s_.widths.empty() ? std::vector<double>{s_.ell} : s_.widths[j]; }

    std::vector<Strip> strips(std::size_t index) const {
        std::size_t p = index / per_perm_;
        std::size_t rest = index % per_perm_;
        std::size_t wi = rest % width_count_;
        std::size_t ti = rest / width_count_;
        std::vector<Strip> out(s_.J);
        for (int j = s_.J - 1; j >= 0; --j) {
            const auto g = grid(j);
            const std::size_t cells = static_cast<std::size_t>(g[0]) * g[1];
            const std::size_t c = ti % cells;
            ti /= cells;
            out[j].s.s1 = s_.ell * static_cast<double>(c / g[1]) / g[0];
            out[j].s.s2 = s_.d * static_cast<double>(c % g[1]) / g[1];
            const auto ws = widths(j);
            out[j].width = ws[wi % ws.size()];
            wi /= ws.size();
        }
        for (int j = 0; j < s_.J; ++j) out[j].medium = perms_[p][j];
        return out;
    }

private:
    DesignSpace s_;
    std::vector<std::vector<int>> perms_;
    std::size_t per_perm_ = 1;
    std::size_t width_count_ = 1;
};

inline std::vector<std::vector<Strip>> enumerate_candidates(const DesignSpace& space) {
    CandidateStream cs(space);
    std::vector<std::vector<Strip>> out;
    out.reserve(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) out.push_back(cs.strips(i));
    return out;
}

struct CandidateResult {
    double T = 0.0, R = 0.0, delta = 0.0;
    bool ok = true;
    std::string error;
};

/// Evaluates layer cakes against fixed media, incidence and discretization, through a cache.
class DesignEvaluator {
public:
    struct Setup {
        std::vector<UnitCell> media;
        double omega = 1.0, theta = 0.0;
        double G0 = 1.0, rho0 = 1.0;
        SpectrumSettings spectrum;
        int M = 4;
        ScatterOptions scatter;
    };

    DesignEvaluator(Setup setup, std::shared_ptr<SpectrumCache> cache)
        : st_(std::move(setup)), cache_(std::move(cache)) {
        if (st_.media.empty()) throw InputError("design evaluator: no media");
        LayerCake probe = cake({});
        half_ = std::make_shared<const HalfspaceModal>(
            halfspace_modal(st_.omega, probe.k2(), st_.M, st_.G0, st_.rho0, st_.media.front().d()));
    }

    const Setup& setup() const noexcept { return st_; }
    SpectrumCache& cache() noexcept { return *cache_; }

    LayerCake cake(std::vector<Strip> strips) const {
        LayerCake c;
        c.strips = std::move(strips);
        c.G0 = st_.G0;
        c.rho0 = st_.rho0;
        c.omega = st_.omega;
        c.theta = st_.theta;
        c.d = st_.media.front().d();
        return c;
    }

    /// Serial prologue: solve every mother medium once.
    void prime() {
        for (const auto& m : st_.media) cache_->spectrum(m, st_.omega, cake({}).k2(), st_.spectrum);
    }

    CandidateResult evaluate(const std::vector<Strip>& strips) {
        CandidateResult res;
        try {
            const double k2 = cake({}).k2();
            std::vector<StripModal> sm;
            sm.reserve(strips.size());
            for (const auto& s : strips) {
                if (s.medium < 0 || s.medium >= static_cast<int>(st_.media.size()))
                    throw InputError("candidate references an unknown medium");
                const UnitCell& cell = st_.media[s.medium];
                auto spec = cache_->spectrum(cell, st_.omega, k2, st_.spectrum);
                StripModal m;
                m.N = spec->N;
                const double ell = cell.ell();
                const double s1 = wrap_periodic(s.s.s1, ell), s2 = wrap_periodic(s.s.s2, cell.d());
                m.at_left = shift_lambda_vertically(*cache_->base_lambda(spec, wrap_periodic(-s1, ell), st_.M, st_.scatter.traces),
                                                    s2, cell.d());
                m.at_right = shift_lambda_vertically(
                    *cache_->base_lambda(spec, wrap_periodic(s.width - s1, ell), st_.M, st_.scatter.traces), s2, cell.d());
                m.at_left.station = 0.0;
                m.at_right.station = s.width;
                m.exp = exp_block(*spec, s.width);
                sm.push_back(std::move(m));
            }
            ScatterOptions so = st_.scatter;
            so.check_refactorized = false;
            const ScatteringSolution sol = solve_from_modal(*half_, sm, so);
            res.T = sol.T_coeff;
            res.R = sol.R_coeff;
            res.delta = sol.delta;
        } catch (const std::exception& e) {
            res.ok = false;
            res.error = e.what();
        }
        return res;
    }

    /// Fresh solve with no cache and no trace reuse.
    CandidateResult evaluate_uncached(const std::vector<Strip>& strips) const {
        CandidateResult res;
        try {
            const LayerCake c = cake(strips);
            std::vector<BlochSpectrum> owned;
            owned.reserve(st_.media.size());
            std::vector<const BlochSpectrum*> ptrs(st_.media.size(), nullptr);
            std::vector<int> used(st_.media.size(), 0);
            for (const auto& s : strips) used.at(s.medium) = 1;
            for (std::size_t q = 0; q < st_.media.size(); ++q)
                if (used[q]) {
                    owned.push_back(compute_spectrum(st_.media[q], st_.omega, c.k2(), st_.spectrum));
                    ptrs[q] = &owned.back();
                }
            const ScatteringSolution sol = solve_scattering(c, ptrs, st_.M, st_.scatter);
            res.T = sol.T_coeff;
            res.R = sol.R_coeff;
            res.delta = sol.delta;
        } catch (const std::exception& e) {
            res.ok = false;
            res.error = e.what();
        }
        return res;
    }

private:
    Setup st_;
    std::shared_ptr<SpectrumCache> cache_;
    std::shared_ptr<const HalfspaceModal> half_;
};

struct Objective {
    enum class Kind { MinT, MinR, Weighted } kind = Kind::MinT;
    double wT = 1.0, wR = 0.0;

    double operator()(const CandidateResult& r) const {
        switch (kind) {
            case Kind::MinT: return r.T;
            case Kind::MinR: return r.R;
            default: return wT * r.T + wR * r.R;
        }
    }
};

struct RankedRow {
    std::size_t index = 0;
    std::vector<Strip> strips;
    CandidateResult result;
    double objective = 0.0;
};

struct SweepStats {
    double seconds = 0.0;
    double mean_candidate_seconds = 0.0;
    long cache_hits = 0, cache_misses = 0;
};

/// Evaluate every candidate of the stream (parallel over `workers`) and rank by objective.
/// Failed candidates go last; ties keep enumeration order.
/// Ranking order: successful rows first, then objective, then enumeration index.
/// Objectives are compared on a 1e-10 grid so round-off cannot reorder exact ties.
inline double objective_key(double v) {
    if (!std::isfinite(v)) return v;
    return std::round(v * 1e10);
}

inline bool rank_before(const RankedRow& a, const RankedRow& b) {
    if (a.result.ok != b.result.ok) return a.result.ok;
    const double ka = objective_key(a.objective), kb = objective_key(b.objective);
    if (ka != kb) return ka < kb;
    return a.index < b.index;
}

inline std::vector<RankedRow> optimize(const CandidateStream& stream, DesignEvaluator& ev, const Objective& obj,
                                       int workers = 1, SweepStats* stats = nullptr) {
    ev.prime();
    const long h0 = ev.cache().hits(), m0 = ev.cache().misses();
    const std::size_t n = stream.size();
    std::vector<RankedRow> rows(n);
    std::atomic<std::size_t> next{0};
    const auto t0 = std::chrono::steady_clock::now();
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            rows[i].index = i;
            rows[i].strips = stream.strips(i);
            rows[i].result = ev.evaluate(rows[i].strips);
            rows[i].objective = rows[i].result.ok ? obj(rows[i].result) : std::numeric_limits<double>::infinity();
        }
    };
    workers = std::max(1, workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::stable_sort(rows.begin(), rows.end(), rank_before);
    if (stats) {
        stats->seconds = secs;
        stats->mean_candidate_seconds = n ? secs / static_cast<double>(n) : 0.0;
        stats->cache_hits = ev.cache().hits() - h0;
        stats->cache_misses = ev.cache().misses() - m0;
    }
    return rows;
}

}  // namespace layercake
