#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "layercake/bloch.hpp"
#include "layercake/design.hpp"
#include "layercake/errors.hpp"
#include "layercake/scatter.hpp"

namespace layercake::io {

inline std::string sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", v);
    return buf;
}

/// Comma-separated table writer, LF line endings.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw InputError("cannot write '" + path.string() + "'");
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void comment(const std::string& text) { out_ << "# " << text << '\n'; }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

inline const char* direction_name(Direction d) { return d == Direction::Left ? "left" : "right"; }

inline void write_spectrum_table(const std::filesystem::path& path, const BlochSpectrum& s) {
    CsvWriter w(path, {"index", "re_kappa", "im_kappa", "direction", "fold", "residual"});
    for (std::size_t n = 0; n < s.modes.size(); ++n) {
        const auto& m = s.modes[n];
        w.row({std::to_string(n + 1), sci(m.kappa.real()), sci(m.kappa.imag()), direction_name(m.direction),
               std::to_string(m.fold), sci(m.residual)});
    }
}

inline void write_strip_eigenvalues(const std::filesystem::path& path, const BlochSpectrum& s) {
    CsvWriter w(path, {"re_kappa", "im_kappa", "direction"});
    const double ell = s.mesh ? s.mesh->ell() : 1.0;
    for (const auto& k : s.strip_eigenvalues)
        w.row({sci(k.real()), sci(k.imag()), direction_name(classify(k, ell))});
}

inline void write_rt_table(const std::filesystem::path& path, const ScatteringSolution& sol) {
    CsvWriter w(path, {"m", "re_r", "im_r", "re_t", "im_t"});
    const int M = sol.half.M;
    for (int m = -M; m <= M; ++m)
        w.row({std::to_string(m), sci(sol.r[m + M].real()), sci(sol.r[m + M].imag()), sci(sol.t[m + M].real()),
               sci(sol.t[m + M].imag())});
}

inline void write_field_table(const std::filesystem::path& path, const std::vector<std::array<double, 2>>& pts,
                              const std::vector<cplx>& u) {
    CsvWriter w(path, {"xi1", "xi2", "re_u", "im_u"});
    for (std::size_t i = 0; i < pts.size(); ++i)
        w.row({sci(pts[i][0]), sci(pts[i][1]), sci(u[i].real()), sci(u[i].imag())});
}

inline void write_poynting_table(const std::filesystem::path& path, const std::vector<CellFlux>& cells) {
    CsvWriter w(path, {"strip", "cell", "P1", "P2"});
    for (const auto& c : cells) w.row({std::to_string(c.strip), std::to_string(c.cell), sci(c.P1), sci(c.P2)});
}

inline std::string strips_label(const std::vector<Strip>& strips, const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t j = 0; j < strips.size(); ++j) {
        if (j) s += ' ';
        s += ids.at(strips[j].medium);
    }
    return s;
}

inline void write_ranked_table(const std::filesystem::path& path, const std::vector<RankedRow>& rows,
                               const std::vector<std::string>& ids, const std::string& space_comment) {
    const int J = rows.empty() ? 0 : static_cast<int>(rows.front().strips.size());
    std::vector<std::string> header{"rank", "index"};
    for (int j = 1; j <= J; ++j) {
        header.push_back("medium_" + std::to_string(j));
        header.push_back("s1_" + std::to_string(j));
        header.push_back("s2_" + std::to_string(j));
        header.push_back("w_" + std::to_string(j));
    }
    for (const char* h : {"T", "R", "delta", "objective", "status"}) header.push_back(h);
    CsvWriter w(path, header);
    w.comment(space_comment);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const RankedRow& row = rows[r];
        std::vector<std::string> cells{std::to_string(r + 1), std::to_string(row.index)};
        for (const auto& s : row.strips) {
            cells.push_back(ids.at(s.medium));
            cells.push_back(sci(s.s.s1));
            cells.push_back(sci(s.s.s2));
            cells.push_back(sci(s.width));
        }
        cells.push_back(sci(row.result.T));
        cells.push_back(sci(row.result.R));
        cells.push_back(sci(row.result.delta));
        cells.push_back(sci(row.objective));
        std::string status = row.result.ok ? "ok" : "error: " + row.result.error;
        for (char& ch : status)
            if (ch == ',' || ch == '\n') ch = ';';
        cells.push_back(status);
        w.row(cells);
    }
}

}  // namespace layercake::io
