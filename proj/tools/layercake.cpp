#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "layercake/layercake.hpp"

namespace fs = std::filesystem;
using namespace layercake;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Overrides {
    std::string config;
    std::string out;
    std::string cache_dir;
    int workers = 1;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path out_dir(const RunConfig& c, const Overrides& o) { return o.out.empty() ? fs::path(c.output.directory) : fs::path(o.out); }

void write_error_record(const fs::path& dir, const std::string& command, const std::string& kind,
                        const std::string& message) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir / "error.json", std::ios::trunc);
    if (!out) return;
    nlohmann::json j = {{"command", command}, {"kind", kind}, {"message", message}};
    out << j.dump(2) << '\n';
}

std::vector<UnitCell> build_media(const RunConfig& c) {
    std::vector<UnitCell> media;
    for (const auto& d : c.media) {
        try {
            media.push_back(build_unit_cell(d));
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
    }
    return media;
}

/// Spectra for the flagged media at the shared (omega, k2), with N fixed or selected automatically.
std::vector<std::shared_ptr<const BlochSpectrum>> solve_media(const RunConfig& c, const std::vector<UnitCell>& media,
                                                              const std::vector<int>& used, double k2,
                                                              SpectrumCache& cache, int& N_out) {
    std::vector<std::shared_ptr<const BlochSpectrum>> out(media.size());
    const int N0 = c.solver.N ? *c.solver.N : c.solver.N_probe;
    for (std::size_t q = 0; q < media.size(); ++q)
        if (used[q]) out[q] = cache.spectrum(media[q], c.omega, k2, c.spectrum_settings(N0));
    N_out = N0;
    if (!c.solver.N) {
        std::vector<const BlochSpectrum*> ptrs;
        for (const auto& s : out)
            if (s) ptrs.push_back(s.get());
        if (ptrs.empty()) return out;
        N_out = select_N(ptrs, c.solver.w_min, c.solver.eps);
        for (auto& s : out)
            if (s) s = std::make_shared<const BlochSpectrum>(truncate_spectrum(*s, N_out));
    }
    return out;
}

int run_spectrum(const RunConfig& c, const Overrides& o) {
    const fs::path dir = out_dir(c, o);
    fs::create_directories(dir);
    const auto media = build_media(c);
    SpectrumCache cache(o.cache_dir.empty() ? SpectrumCache::default_directory() : o.cache_dir);
    const double k2 = c.spectrum_k2();
    const auto t0 = std::chrono::steady_clock::now();
    int N = 0;
    const auto spectra = solve_media(c, media, std::vector<int>(media.size(), 1), k2, cache, N);
    io::CsvWriter summary(dir / "spectrum_summary.csv",
                          {"medium", "omega", "k2", "N", "strip_count", "real_count", "pairing_defect",
                           "injectivity_bound", "repeated", "edge_merged"});
    for (std::size_t q = 0; q < media.size(); ++q) {
        const BlochSpectrum& s = *spectra[q];
        const std::string& id = c.media[q].id;
        io::write_spectrum_table(dir / ("spectrum_" + id + ".csv"), s);
        io::write_strip_eigenvalues(dir / ("strip_" + id + ".csv"), s);
        summary.row({id, io::sci(c.omega), io::sci(k2), std::to_string(s.N), std::to_string(s.strip_eigenvalues.size()),
                     std::to_string(real_count(s.strip_eigenvalues, media[q].ell())),
                     io::sci(pairing_defect(s.strip_eigenvalues, media[q].ell())),
                     io::sci(injectivity_bound(media[q])), std::to_string(s.repeated), std::to_string(s.edge_merged)});
    }
    std::cout << "spectrum: " << media.size() << " media, N=" << N << ", " << seconds_since(t0) << " s, output in "
              << dir.string() << "\n";
    return kExitOk;
}

int run_scatter(const RunConfig& c, const Overrides& o) {
    const fs::path dir = out_dir(c, o);
    fs::create_directories(dir);
    const auto media = build_media(c);
    const LayerCake cake = c.cake();
    SpectrumCache cache(o.cache_dir.empty() ? SpectrumCache::default_directory() : o.cache_dir);
    std::vector<int> used(media.size(), 0);
    for (const auto& s : cake.strips) used[s.medium] = 1;
    const auto t0 = std::chrono::steady_clock::now();
    int N = 0;
    const auto spectra = solve_media(c, media, used, cake.k2(), cache, N);
    const double t_spec = seconds_since(t0);
    std::vector<const BlochSpectrum*> ptrs;
    for (const auto& s : spectra) ptrs.push_back(s.get());
    const int M = c.solver.M ? *c.solver.M : default_M(N);
    const auto t1 = std::chrono::steady_clock::now();
    const ScatteringSolution sol = solve_scattering(cake, ptrs, M, c.scatter_options());
    const double t_solve = seconds_since(t1);

    io::write_rt_table(dir / "rt.csv", sol);
    {
        io::CsvWriter w(dir / "summary.csv", {"T", "R", "delta", "N", "M", "refactorized_mismatch",
                                              "spectrum_seconds", "solve_seconds"});
        w.row({io::sci(sol.T_coeff), io::sci(sol.R_coeff), io::sci(sol.delta), std::to_string(N), std::to_string(M),
               io::sci(sol.refactorized_mismatch), io::sci(t_spec), io::sci(t_solve)});
    }
    {
        io::CsvWriter w(dir / "interfaces.csv", {"interface", "residual", "rank_deficit", "sweep_condition"});
        for (std::size_t i = 0; i < sol.interface_residuals.size(); ++i) {
            // sweep systems are solved from the last strip back to the first
            const std::size_t nc = sol.sweep_condition.size();
            const std::string cond = i < nc ? io::sci(sol.sweep_condition[nc - 1 - i]) : "";
            w.row({std::to_string(i + 1), io::sci(sol.interface_residuals[i]),
                   std::to_string(sol.interface_rank_deficit[i]), cond});
        }
    }
    const auto [nx, ny] = c.output.field_grid;
    if (nx > 0 && ny > 0) {
        const double L = cake.length(), a = -c.output.field_margin, b = L + c.output.field_margin;
        std::vector<std::array<double, 2>> pts;
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                pts.push_back({nx > 1 ? a + (b - a) * ix / (nx - 1) : 0.5 * (a + b), cake.d * iy / ny});
        io::write_field_table(dir / "field.csv", pts, reconstruct_field(sol, cake, ptrs, pts));
    }
    if (c.output.poynting) io::write_poynting_table(dir / "poynting.csv", cell_poynting_map(sol, cake, ptrs));
    std::cout << "scatter: T=" << io::sci(sol.T_coeff) << " R=" << io::sci(sol.R_coeff) << " delta="
              << io::sci(sol.delta) << " (N=" << N << ", M=" << M << ")\n";
    return kExitOk;
}

int run_optimize(const RunConfig& c, const Overrides& o) {
    if (!c.design.present) throw ConfigError("optimize needs a 'design' section");
    const fs::path dir = out_dir(c, o);
    fs::create_directories(dir);
    const auto all_media = build_media(c);
    const DesignSpace space = design_space(c);
    CandidateStream stream(space);

    DesignEvaluator::Setup setup;
    for (const auto& id : c.design.media) setup.media.push_back(all_media[c.medium_index(id)]);
    setup.omega = c.omega;
    setup.theta = c.theta;
    setup.G0 = c.G0;
    setup.rho0 = c.rho0;
    setup.scatter = c.scatter_options();
    auto cache = std::make_shared<SpectrumCache>(o.cache_dir.empty() ? SpectrumCache::default_directory() : o.cache_dir);
    int N = c.solver.N ? *c.solver.N : 0;
    if (!c.solver.N) {
        RunConfig probe = c;
        probe.media.clear();
        for (const auto& id : c.design.media) probe.media.push_back(c.media[c.medium_index(id)]);
        solve_media(probe, setup.media, std::vector<int>(setup.media.size(), 1), c.incidence_k2(), *cache, N);
    }
    setup.spectrum = c.spectrum_settings(N);
    setup.M = c.solver.M ? *c.solver.M : default_M(N);
    DesignEvaluator ev(setup, cache);

    std::vector<RankedRow> rows;
    SweepStats stats;
    if (c.design.limit > 0 && c.design.limit < stream.size()) {
        // evaluate a prefix of the stream with the same ranking rules
        ev.prime();
        const auto t0 = std::chrono::steady_clock::now();
        const long h0 = cache->hits(), m0 = cache->misses();
        for (std::size_t i = 0; i < c.design.limit; ++i) {
            RankedRow r;
            r.index = i;
            r.strips = stream.strips(i);
            r.result = ev.evaluate(r.strips);
            r.objective = r.result.ok ? c.design.objective(r.result) : std::numeric_limits<double>::infinity();
            rows.push_back(std::move(r));
        }
        std::stable_sort(rows.begin(), rows.end(), rank_before);
        stats.seconds = seconds_since(t0);
        stats.mean_candidate_seconds = stats.seconds / static_cast<double>(c.design.limit);
        stats.cache_hits = cache->hits() - h0;
        stats.cache_misses = cache->misses() - m0;
    } else {
        rows = optimize(stream, ev, c.design.objective, o.workers, &stats);
    }

    std::string comment = "Q=" + std::to_string(space.Q) + " J=" + std::to_string(space.J) +
                          " candidates=" + std::to_string(stream.size()) + " evaluated=" + std::to_string(rows.size()) +
                          " omega=" + io::sci(c.omega) + " theta=" + io::sci(c.theta) + " N=" + std::to_string(N) +
                          " M=" + std::to_string(setup.M);
    io::write_ranked_table(dir / "ranked.csv", rows, c.design.media, comment);
    {
        io::CsvWriter w(dir / "sweep_stats.csv",
                        {"candidates", "seconds", "mean_candidate_seconds", "cache_hits", "cache_misses", "failed"});
        std::size_t failed = 0;
        for (const auto& r : rows) failed += r.result.ok ? 0 : 1;
        w.row({std::to_string(rows.size()), io::sci(stats.seconds), io::sci(stats.mean_candidate_seconds),
               std::to_string(stats.cache_hits), std::to_string(stats.cache_misses), std::to_string(failed)});
    }
    if (!rows.empty() && rows.front().result.ok) {
        RunConfig best = c;
        best.strips.clear();
        for (const auto& s : rows.front().strips)
            best.strips.push_back({c.design.media.at(s.medium), s.width, s.s});
        std::ofstream out(dir / "best_config.json", std::ios::trunc);
        out << to_json(best).dump(2) << '\n';
    }
    const double rate = stats.cache_hits + stats.cache_misses > 0
                            ? static_cast<double>(stats.cache_hits) / (stats.cache_hits + stats.cache_misses)
                            : 0.0;
    std::cout << "optimize: " << rows.size() << " candidates, mean " << stats.mean_candidate_seconds
              << " s/candidate, cache hit rate " << rate;
    if (!rows.empty()) std::cout << ", best T=" << io::sci(rows.front().result.T);
    std::cout << "\n";
    return kExitOk;
}

int dispatch(const std::string& command, const Overrides& o) {
    fs::path dir = o.out.empty() ? fs::path("out") : fs::path(o.out);
    try {
        const RunConfig c = load_config(o.config);
        dir = out_dir(c, o);
        if (command == "spectrum") return run_spectrum(c, o);
        if (command == "scatter") return run_scatter(c, o);
        return run_optimize(c, o);
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        write_error_record(dir, command, "config", e.what());
        return kExitConfig;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        write_error_record(dir, command, "solver", e.what());
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_record(dir, command, "solver", e.what());
        return kExitSolver;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layer-cake periodic scattering via factorized Bloch waves"};
    app.require_subcommand(1);
    Overrides o;
    std::string command;
    for (const char* name : {"spectrum", "scatter", "optimize"}) {
        CLI::App* sub = app.add_subcommand(name, std::string(name) == "spectrum"  ? "Bloch spectra of every medium"
                                                 : std::string(name) == "scatter" ? "Solve one layer cake"
                                                                                  : "Rank a design space");
        sub->add_option("config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--out", o.out, "Output directory (overrides output.directory)");
        sub->add_option("--cache-dir", o.cache_dir, "Spectrum cache directory (default $LAYERCAKE_CACHE_DIR)");
        if (std::string(name) == "optimize")
            sub->add_option("-j,--workers", o.workers, "Worker threads for the sweep")->check(CLI::PositiveNumber);
        sub->callback([&command, name] { command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    return dispatch(command, o);
}
