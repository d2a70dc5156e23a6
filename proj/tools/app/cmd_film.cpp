// xrd, rrr and sheet: room-temperature and DC film characterisation.

#include <fmt/format.h>

#include <map>
#include <optional>

#include "app.hpp"
#include "parallel.hpp"
#include "qloss/dataio.hpp"
#include "qloss/error.hpp"
#include "qloss/filmchar.hpp"
#include "qloss/report.hpp"

namespace qloss::app {

namespace fs = std::filesystem;
using report::Json;

namespace {

int exit_code(std::size_t ok, std::size_t failed) {
    if (ok == 0) return kExitError;
    return failed ? kExitPartial : kExitOk;
}

Json header_json(const dataio::Header& h) {
    Json j = Json::object();
    for (const auto& [k, v] : h) j[k] = v;
    return j;
}

const filmchar::PeakFit* strongest_in(const std::vector<filmchar::PeakFit>& peaks, const filmchar::Window& band) {
    const filmchar::PeakFit* best = nullptr;
    for (const auto& p : peaks) {
        if (p.center >= band.lo && p.center <= band.hi && (!best || p.amplitude > best->amplitude)) best = &p;
    }
    return best;
}

}  // namespace

int cmd_xrd(Context& ctx, const XrdArgs& a) {
    const auto files = collect_files(a.inputs, ".txt");
    if (files.empty()) throw DomainError("xrd: no input scans");
    std::vector<filmchar::Window> windows;
    if (ctx.global.windows.empty()) {
        windows = filmchar::default_windows();
    } else {
        for (const auto& [lo, hi] : parse_interval_list(ctx.global.windows)) windows.push_back({lo, hi});
    }

    struct Outcome {
        std::optional<dataio::XrdScan> scan;
        std::vector<filmchar::PeakFit> peaks;
        std::vector<std::string> empty_windows;
        std::string error;
    };
    std::vector<Outcome> outcomes(files.size());
    parallel_for(files.size(), ctx.global.jobs, [&](std::size_t i) {
        auto& o = outcomes[i];
        try {
            o.scan = dataio::parse_xrd_file(files[i]);
            // A single-orientation film leaves the other window empty; only a
            // scan with no peak anywhere is an error.
            for (const auto& w : windows) {
                try {
                    o.peaks.push_back(filmchar::fit_peak(*o.scan, w));
                } catch (const NoPeakError& e) {
                    o.empty_windows.push_back(e.what());
                }
            }
            if (o.peaks.empty()) throw NoPeakError(fmt::format("no peak in any of {} windows", windows.size()));
        } catch (const Error& e) {
            o.error = e.what();
        }
    });

    Json diagnostics = Json::array();
    Json entries = Json::array();
    const Outcome* reference = nullptr;
    std::string reference_name;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.error.empty()) {
            add_diagnostic(ctx, diagnostics, files[i].string(), o.error);
            continue;
        }
        ++ok;
        if (!reference) {
            reference = &o;
            reference_name = files[i].string();
        }
        Json e = Json::object();
        e["source"] = files[i].string();
        e["header"] = header_json(o.scan->header());
        Json peaks = Json::array();
        for (const auto& p : o.peaks) peaks.push_back(report::to_json(p));
        e["peaks"] = std::move(peaks);
        Json empty = Json::array();
        for (const auto& w : o.empty_windows) empty.push_back(w);
        e["empty_windows"] = std::move(empty);
        const auto orient = filmchar::classify_orientation(o.peaks);
        e["orientation"] = report::to_json(orient);

        // Grain size relative to the first scan, band by band.
        Json ratios = Json::object();
        for (const auto& [name, band] : {std::pair{"111", filmchar::kBand111}, std::pair{"200", filmchar::kBand200}}) {
            const auto* mine = strongest_in(o.peaks, band);
            const auto* ref = strongest_in(reference->peaks, band);
            ratios[name] = mine && ref ? report::quantity(filmchar::scherrer_ratio(*mine, *ref), "dimensionless")
                                       : Json(nullptr);
        }
        e["grain_size_ratio_vs_reference"] = std::move(ratios);

        report::PlotData plot;
        plot.header = {{"source", files[i].string()}};
        plot.columns = {"two_theta_deg", "counts", "model"};
        for (std::size_t k = 0; k < o.scan->size(); ++k) {
            const double x = o.scan->two_theta()[k];
            double model = std::numeric_limits<double>::quiet_NaN();
            for (const auto& p : o.peaks) {
                if (x >= p.window.lo && x <= p.window.hi) model = filmchar::peak_model(p, x);
            }
            plot.rows.push_back({x, o.scan->counts()[k], model});
        }
        const fs::path plot_path = ctx.global.out / "plots" / (file_stem_token(files[i]) + "_xrd.txt");
        report::write_plot_data(plot, plot_path);
        e["plot_file"] = fs::relative(plot_path, ctx.global.out).generic_string();
        entries.push_back(std::move(e));

        ctx.out << files[i].string() << ": " << filmchar::to_string(orient.orientation);
        for (const auto& p : o.peaks) ctx.out << fmt::format("  {:.3f} deg (fwhm {:.3f}, eta {:.2f})", p.center, p.fwhm, p.eta);
        ctx.out << "\n";
    }

    Json r = report::make_report("xrd");
    Json w = Json::array();
    for (const auto& x : windows) w.push_back(Json::array({x.lo, x.hi}));
    r["windows"] = std::move(w);
    r["reference"] = reference_name;
    r["entries"] = std::move(entries);
    r["diagnostics"] = diagnostics;
    report::write_report(r, ctx.global.out / "xrd_report.json");
    return exit_code(ok, diagnostics.size());
}

int cmd_rrr(Context& ctx, const RrrArgs& a) {
    const auto files = collect_files(a.inputs, ".txt");
    if (files.empty()) throw DomainError("rrr: no input R(T) files");
    std::vector<std::optional<filmchar::TcResult>> results(files.size());
    std::vector<std::string> errors(files.size());
    std::vector<dataio::Header> headers(files.size());
    parallel_for(files.size(), ctx.global.jobs, [&](std::size_t i) {
        try {
            const auto sweep = dataio::parse_rt_file(files[i]);
            headers[i] = sweep.header();
            results[i] = filmchar::extract_tc_rrr(sweep);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    Json diagnostics = Json::array();
    Json entries = Json::array();
    std::size_t ok = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!results[i]) {
            add_diagnostic(ctx, diagnostics, files[i].string(), errors[i]);
            continue;
        }
        ++ok;
        Json e = Json::object();
        e["source"] = files[i].string();
        e["header"] = header_json(headers[i]);
        e["result"] = report::to_json(*results[i]);
        entries.push_back(std::move(e));
        ctx.out << fmt::format("{}: Tc {:.3f} K  width {:.3f} K  RRR {:.3f}\n", files[i].string(), results[i]->tc,
                               results[i]->transition_width, results[i]->rrr);
    }
    Json r = report::make_report("rrr");
    r["entries"] = std::move(entries);
    r["diagnostics"] = diagnostics;
    report::write_report(r, ctx.global.out / "rrr_report.json");
    return exit_code(ok, diagnostics.size());
}

int cmd_sheet(Context& ctx, const SheetArgs& a) {
    const auto files = collect_files(a.inputs, ".txt");
    if (files.empty()) throw DomainError("sheet: no input files");
    std::map<std::string, std::vector<dataio::SheetMap>> batches;
    for (const auto& f : files) {
        for (auto& m : dataio::parse_sheet_file(f)) batches[m.batch_id].push_back(std::move(m));
    }

    Json entries = Json::array();
    for (const auto& [batch, maps] : batches) {
        const auto st = filmchar::sheet_stats(maps);
        Json e = Json::object();
        e["batch_id"] = batch;
        e["depo"] = maps.front().depo_key;
        e["stats"] = report::to_json(st);
        std::optional<double> rho;
        if (a.thickness_nm) rho = filmchar::resistivity(st.mean, *a.thickness_nm);
        e["thickness"] = a.thickness_nm ? report::quantity(*a.thickness_nm, "nm") : Json(nullptr);
        e["resistivity"] = rho ? report::quantity(*rho, "uOhm*cm") : Json(nullptr);
        entries.push_back(std::move(e));
        ctx.out << fmt::format("{} ({}): {} wafers  mean {:.4g} ohm/sq  max wafer sigma {:.2f}%  max pointwise sigma {:.2f}%",
                               batch, maps.front().depo_key, st.wafers, st.mean, st.max_wafer_sigma_pct,
                               st.max_pointwise_sigma_pct);
        if (rho) ctx.out << fmt::format("  rho {:.4g} uOhm*cm", *rho);
        ctx.out << "\n";
    }
    Json r = report::make_report("sheet");
    Json src = Json::array();
    for (const auto& f : files) src.push_back(f.string());
    r["sources"] = std::move(src);
    r["entries"] = std::move(entries);
    report::write_report(r, ctx.global.out / "sheet_report.json");
    return kExitOk;
}

}  // namespace qloss::app
