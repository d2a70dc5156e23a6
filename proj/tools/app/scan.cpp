#include "scan.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "qloss/error.hpp"

namespace qloss::app {

namespace {

struct Run {
    std::size_t first;
    std::size_t last;
};

}  // namespace

std::vector<Candidate> scan_dips(const dataio::ComplexSweep& sweep, const ScanOptions& opt) {
    const auto f = sweep.frequency();
    const auto s = sweep.s21();
    const std::size_t n = sweep.size();

    std::vector<double> mag_db(n);
    for (std::size_t i = 0; i < n; ++i) mag_db[i] = 20.0 * std::log10(std::max(std::abs(s[i]), 1e-300));

    // Moving median over a fixed frequency width keeps the baseline honest on
    // grids that are much denser near the resonances.
    std::vector<double> baseline(n);
    std::vector<double> buf;
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (f[lo] < f[i] - 0.5 * opt.baseline_window_hz) ++lo;
        while (hi < n && f[hi] <= f[i] + 0.5 * opt.baseline_window_hz) ++hi;
        buf.assign(mag_db.begin() + static_cast<std::ptrdiff_t>(lo), mag_db.begin() + static_cast<std::ptrdiff_t>(hi));
        const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        baseline[i] = *mid;
    }

    std::vector<Run> runs;
    for (std::size_t i = 0; i < n; ++i) {
        if (baseline[i] - mag_db[i] < opt.prominence_db) continue;
        if (!runs.empty() && runs.back().last + 1 == i) {
            runs.back().last = i;
        } else {
            runs.push_back({i, i});
        }
    }
    // Noise can split one dip into neighbouring runs; join runs closer than
    // their own width.
    std::vector<Run> merged;
    for (const auto& r : runs) {
        if (!merged.empty()) {
            auto& m = merged.back();
            const double gap = f[r.first] - f[m.last];
            const double width = std::max(f[m.last] - f[m.first], f[r.last] - f[r.first]);
            if (gap <= width) {
                m.last = r.last;
                continue;
            }
        }
        merged.push_back(r);
    }
    if (merged.empty()) {
        throw FitError(fmt::format("no dips found deeper than {} dB below the baseline", opt.prominence_db));
    }

    std::vector<Candidate> out;
    for (const auto& r : merged) {
        std::size_t imin = r.first;
        for (std::size_t i = r.first; i <= r.last; ++i) {
            if (mag_db[i] < mag_db[imin]) imin = i;
        }
        // FWHM of the dip in |S21|^2 at half depth relative to the baseline.
        const double base_p = std::pow(10.0, baseline[imin] / 10.0);
        const double min_p = std::norm(s[imin]);
        const double half = 0.5 * (base_p + min_p);
        double left = f[imin];
        for (std::size_t i = imin; i > 0; --i) {
            if (std::norm(s[i - 1]) >= half) {
                const double t = (half - std::norm(s[i])) / (std::norm(s[i - 1]) - std::norm(s[i]));
                left = f[i] - t * (f[i] - f[i - 1]);
                break;
            }
        }
        double right = f[imin];
        for (std::size_t i = imin; i + 1 < n; ++i) {
            if (std::norm(s[i + 1]) >= half) {
                const double t = (half - std::norm(s[i])) / (std::norm(s[i + 1]) - std::norm(s[i]));
                right = f[i] + t * (f[i + 1] - f[i]);
                break;
            }
        }
        Candidate c;
        c.frequency = f[imin];
        c.depth_db = baseline[imin] - mag_db[imin];
        c.fwhm = std::max(right - left, f[std::min(imin + 1, n - 1)] - f[imin > 0 ? imin - 1 : 0]);
        c.lo = std::max(f.front(), c.frequency - opt.window_fwhm * c.fwhm);
        c.hi = std::min(f.back(), c.frequency + opt.window_fwhm * c.fwhm);
        out.push_back(c);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].label = fmt::format("R{}", k + 1);
        const bool near_prev = k > 0 && out[k].frequency - out[k - 1].frequency < opt.proximity_hz;
        const bool near_next = k + 1 < out.size() && out[k + 1].frequency - out[k].frequency < opt.proximity_hz;
        out[k].proximity = near_prev || near_next;
    }
    return out;
}

void write_windows_file(const std::vector<Candidate>& cands, const std::filesystem::path& path) {
    std::string text = "label f_center_hz f_lo_hz f_hi_hz fwhm_hz depth_db proximity\n";
    for (const auto& c : cands) {
        text += fmt::format("{} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {}\n", c.label, c.frequency, c.lo, c.hi, c.fwhm,
                            c.depth_db, c.proximity ? 1 : 0);
    }
    dataio::write_text_file(path, text);
}

std::vector<Candidate> parse_windows_file(const std::filesystem::path& path) {
    const auto file = dataio::parse_column_file(path);
    const auto cl = file.column("label");
    const auto cf = file.column("f_center_hz");
    const auto clo = file.column("f_lo_hz");
    const auto chi = file.column("f_hi_hz");
    std::vector<Candidate> out;
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        Candidate c;
        c.label = file.rows[r][cl];
        c.frequency = file.number(r, cf);
        c.lo = file.number(r, clo);
        c.hi = file.number(r, chi);
        if (!(c.hi > c.lo)) throw ParseError(file.path, file.row_lines[r], "window upper edge not above lower edge");
        if (auto it = std::find(file.columns.begin(), file.columns.end(), "fwhm_hz"); it != file.columns.end()) {
            c.fwhm = file.number(r, static_cast<std::size_t>(it - file.columns.begin()));
        }
        out.push_back(c);
    }
    if (out.empty()) throw ParseError(file.path, 0, "window file lists no windows");
    return out;
}

}  // namespace qloss::app
