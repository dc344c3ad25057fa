#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "layercake/bloch.hpp"
#include "layercake/modal.hpp"

namespace layercake {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Canonical text of a cell's geometry and materials, used to key cached spectra.
inline std::string describe_cell(const UnitCell& c) {
    std::string s = c.base_id() + ";" + format_g17(c.ell()) + "," + format_g17(c.d()) + ";bg=" +
                    format_g17(c.background().G) + "," + format_g17(c.background().rho);
    for (const auto& sh : c.shapes()) {
        std::visit(
            [&s](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Rectangle>) {
                    s += ";rect=" + format_g17(v.cx) + "," + format_g17(v.cy) + "," + format_g17(v.wx) + "," +
                         format_g17(v.wy);
                } else {
                    s += ";ell=" + format_g17(v.cx) + "," + format_g17(v.cy) + "," + format_g17(v.ax) + "," +
                         format_g17(v.ay);
                }
                s += "," + format_g17(v.material.G) + "," + format_g17(v.material.rho);
            },
            sh);
    }
    s += ";s=" + format_g17(c.translation().s1) + "," + format_g17(c.translation().s2);
    return s;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string spectrum_key(const UnitCell& cell, double omega, double k2, const SpectrumSettings& st) {
    const int frak = st.frak_N > 0 ? st.frak_N : 20 * st.N;
    return describe_cell(cell) + "|w=" + format_g17(omega) + "|k2=" + format_g17(k2) + "|N=" + std::to_string(st.N) +
           "|F=" + std::to_string(frak) + "|h=" + format_g17(st.h) + "|p=" + std::to_string(st.order) +
           "|sig=" + format_g17(st.solve.shift.real()) + "," + format_g17(st.solve.shift.imag()) +
           "|tol=" + format_g17(st.solve.tol_res);
}

namespace io_detail {

inline constexpr char kMagic[4] = {'L', 'C', 'B', 'S'};
inline constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
bool get(std::istream& is, T& v) {
    return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace io_detail

/// Versioned binary record: magic, version, key, (omega, k2, N), strip eigenvalues, then modes.
inline void write_spectrum_record(const std::filesystem::path& path, const std::string& key, const BlochSpectrum& s) {
    using namespace io_detail;
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw InputError("cannot write cache record " + path.string());
        os.write(kMagic, 4);
        put(os, kVersion);
        put(os, static_cast<std::uint64_t>(key.size()));
        os.write(key.data(), static_cast<std::streamsize>(key.size()));
        put(os, s.omega);
        put(os, s.k2);
        put(os, static_cast<std::int32_t>(s.N));
        put(os, static_cast<std::int32_t>(s.repeated));
        put(os, static_cast<std::uint64_t>(s.strip_eigenvalues.size()));
        for (const auto& k : s.strip_eigenvalues) put(os, k);
        const std::uint64_t n = s.modes.empty() ? 0 : static_cast<std::uint64_t>(s.modes[0].phi.size());
        put(os, n);
        for (const auto& m : s.modes) {
            put(os, m.kappa);
            put(os, static_cast<std::int32_t>(m.fold));
            put(os, static_cast<std::uint8_t>(m.direction == Direction::Left ? 0 : 1));
            put(os, m.residual);
            os.write(reinterpret_cast<const char*>(m.phi.data()), static_cast<std::streamsize>(n * sizeof(cplx)));
        }
    }
    std::filesystem::rename(tmp, path);
}

/// Returns false when the file is absent, truncated, of another version, or keyed differently.
inline bool read_spectrum_record(const std::filesystem::path& path, const std::string& key,
                                 std::shared_ptr<const PeriodicMesh> mesh, BlochSpectrum& s) {
    using namespace io_detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) return false;
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) return false;
    std::uint32_t version = 0;
    if (!get(is, version) || version != kVersion) return false;
    std::uint64_t klen = 0;
    if (!get(is, klen) || klen > (1u << 20)) return false;
    std::string k(klen, '\0');
    if (!is.read(k.data(), static_cast<std::streamsize>(klen)) || k != key) return false;
    std::int32_t N = 0, rep = 0;
    std::uint64_t ns = 0, n = 0;
    if (!get(is, s.omega) || !get(is, s.k2) || !get(is, N) || !get(is, rep) || !get(is, ns)) return false;
    s.strip_eigenvalues.resize(ns);
    for (auto& e : s.strip_eigenvalues)
        if (!get(is, e)) return false;
    if (!get(is, n) || static_cast<int>(n) != mesh->dofs()) return false;
    s.N = N;
    s.repeated = rep;
    s.modes.resize(2 * N);
    for (auto& m : s.modes) {
        std::int32_t fold = 0;
        std::uint8_t dir = 0;
        if (!get(is, m.kappa) || !get(is, fold) || !get(is, dir) || !get(is, m.residual)) return false;
        m.fold = fold;
        m.direction = dir == 0 ? Direction::Left : Direction::Right;
        m.phi.resize(static_cast<Eigen::Index>(n));
        if (!is.read(reinterpret_cast<char*>(m.phi.data()), static_cast<std::streamsize>(n * sizeof(cplx))))
            return false;
    }
    s.cell_id = mesh->cell_id();
    s.mesh = std::move(mesh);
    return true;
}

/// Thread-safe memo of spectra and base-station trace blocks, optionally backed by a directory.
class SpectrumCache {
public:
    using SpectrumPtr = std::shared_ptr<const BlochSpectrum>;
    using LambdaPtr = std::shared_ptr<const LambdaBlock>;

    explicit SpectrumCache(std::string directory = default_directory()) : dir_(std::move(directory)) {}

    static std::string default_directory() {
        const char* env = std::getenv("LAYERCAKE_CACHE_DIR");
        return env ? std::string(env) : std::string();
    }

    const std::string& directory() const noexcept { return dir_; }

    SpectrumPtr spectrum(const UnitCell& cell, double omega, double k2, const SpectrumSettings& st) {
        const std::string key = spectrum_key(cell, omega, k2, st);
        std::shared_future<SpectrumPtr> fut;
        std::promise<SpectrumPtr> prom;
        bool owner = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = spectra_.find(key);
            if (it != spectra_.end()) {
                fut = it->second;
                ++hits_;
            } else {
                fut = prom.get_future().share();
                spectra_.emplace(key, fut);
                owner = true;
                ++misses_;
            }
        }
        if (!owner) return fut.get();
        try {
            prom.set_value(load_or_compute(cell, omega, k2, st, key));
        } catch (...) {
            prom.set_exception(std::current_exception());
            std::lock_guard<std::mutex> lock(mu_);
            spectra_.erase(key);
        }
        return fut.get();
    }

    /// Trace block of `spec` at cell station X (already reduced modulo ell), no translation.
    LambdaPtr base_lambda(const SpectrumPtr& spec, double X, int M, const TraceOptions& topt) {
        const std::string key = std::to_string(reinterpret_cast<std::uintptr_t>(spec.get())) + "|" + format_g17(X) +
                                "|" + std::to_string(M) + "|" + format_g17(topt.band) + "|" +
                                std::to_string(topt.points);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = lambdas_.find(key);
            if (it != lambdas_.end()) {
                ++lambda_hits_;
                return it->second;
            }
        }
        TraceOptions o = topt;
        o.recompute = false;
        auto lb = std::make_shared<const LambdaBlock>(trace_lambda(*spec, X, M, {}, o));
        std::lock_guard<std::mutex> lock(mu_);
        ++lambda_misses_;
        return lambdas_.emplace(key, lb).first->second;
    }

    long hits() const noexcept { return hits_; }
    long misses() const noexcept { return misses_; }
    long lambda_hits() const noexcept { return lambda_hits_; }
    long lambda_misses() const noexcept { return lambda_misses_; }
    long disk_loads() const noexcept { return disk_loads_; }

private:
    SpectrumPtr load_or_compute(const UnitCell& cell, double omega, double k2, const SpectrumSettings& st,
                                const std::string& key) {
        auto mesh = std::make_shared<const PeriodicMesh>(mesh_unit_cell(cell, st.h, st.order));
        std::filesystem::path file;
        if (!dir_.empty()) {
            char name[40];
            std::snprintf(name, sizeof name, "%016llx.lcbs", static_cast<unsigned long long>(fnv1a(key)));
            file = std::filesystem::path(dir_) / name;
            auto s = std::make_shared<BlochSpectrum>();
            if (read_spectrum_record(file, key, mesh, *s)) {
                ++disk_loads_;
                return s;
            }
        }
        const QevpMatrices q = assemble_qevp(*mesh, omega, k2);
        SolveOptions so = st.solve;
        so.frak_N = st.frak_N > 0 ? st.frak_N : 20 * st.N;
        auto s = std::make_shared<BlochSpectrum>(classify_and_truncate(solve_spectrum(q, so), st.N, mesh, omega, k2));
        if (!file.empty()) write_spectrum_record(file, key, *s);
        return s;
    }

    std::string dir_;
    std::mutex mu_;
    std::map<std::string, std::shared_future<SpectrumPtr>> spectra_;
    std::map<std::string, LambdaPtr> lambdas_;
    std::atomic<long> hits_{0}, misses_{0}, lambda_hits_{0}, lambda_misses_{0}, disk_loads_{0};
};

}  // namespace layercake
