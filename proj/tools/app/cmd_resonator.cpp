// scan, fit and power: the microwave side of the pipeline.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <tuple>

#include "app.hpp"
#include "parallel.hpp"
#include "qloss/circlefit.hpp"
#include "qloss/dataio.hpp"
#include "qloss/error.hpp"
#include "qloss/report.hpp"
#include "qloss/tlsloss.hpp"
#include "scan.hpp"

namespace qloss::app {

namespace fs = std::filesystem;
using report::Json;

namespace {

dataio::ComplexSweep with_attenuation(const dataio::ComplexSweep& s, const std::optional<double>& att) {
    if (!att) return s;
    auto meta = s.meta();
    meta.line_attenuation_db = *att;
    return {std::vector<double>(s.frequency().begin(), s.frequency().end()),
            std::vector<std::complex<double>>(s.s21().begin(), s.s21().end()), std::move(meta)};
}

int exit_code(std::size_t ok, std::size_t failed) {
    if (ok == 0) return kExitError;
    return failed ? kExitPartial : kExitOk;
}

}  // namespace

int cmd_scan(Context& ctx, const ScanArgs& a) {
    const auto sweep = dataio::parse_sweep_file(a.input);
    ScanOptions opt;
    opt.prominence_db = a.prominence_db;
    const auto cands = scan_dips(sweep, opt);

    const fs::path windows = ctx.global.out / "windows.txt";
    write_windows_file(cands, windows);

    Json r = report::make_report("scan");
    r["input"] = report::provenance(sweep.meta());
    r["prominence"] = report::quantity(opt.prominence_db, "dB");
    r["proximity_threshold"] = report::quantity(opt.proximity_hz, "Hz");
    Json list = Json::array();
    for (const auto& c : cands) {
        Json e = Json::object();
        e["label"] = c.label;
        e["frequency"] = report::quantity(c.frequency, "Hz");
        e["fwhm"] = report::quantity(c.fwhm, "Hz");
        e["depth"] = report::quantity(c.depth_db, "dB");
        e["window"] = Json::array({c.lo, c.hi});
        e["proximity_flag"] = c.proximity;
        list.push_back(std::move(e));
        ctx.out << fmt::format("{} {:.6f} GHz  depth {:.1f} dB  fwhm {:.1f} kHz{}\n", c.label, c.frequency / 1e9,
                               c.depth_db, c.fwhm / 1e3, c.proximity ? "  [close neighbour]" : "");
    }
    r["candidates"] = std::move(list);
    r["windows_file"] = windows.filename().string();
    report::write_report(r, ctx.global.out / "scan_report.json");
    return kExitOk;
}

int cmd_fit(Context& ctx, const FitArgs& a) {
    const auto files = collect_files(a.inputs, ".txt");
    if (files.empty()) throw DomainError("fit: no input sweep files");

    Json diagnostics = Json::array();
    // Work items are either whole files or window segments cut from them.
    std::vector<std::shared_ptr<const dataio::ComplexSweep>> items;
    std::vector<std::string> item_names;

    std::vector<Candidate> windows;
    if (!ctx.global.windows.empty()) windows = parse_windows_file(ctx.global.windows);

    for (const auto& f : files) {
        try {
            const auto sweep = with_attenuation(dataio::parse_sweep_file(f), ctx.global.attenuation_db);
            if (windows.empty()) {
                items.push_back(std::make_shared<const dataio::ComplexSweep>(sweep));
                item_names.push_back(f.string());
                continue;
            }
            for (const auto& w : windows) {
                const fs::path seg = ctx.global.out / "segments" / w.label / (file_stem_token(f) + ".txt");
                try {
                    auto meta = sweep.meta();
                    meta.resonator_id = w.label;
                    meta.source = seg.string();
                    meta.extra["segment_of"] = f.string();
                    auto piece = sweep.slice(w.lo, w.hi, meta);
                    dataio::write_sweep_file(piece, seg);
                    items.push_back(std::make_shared<const dataio::ComplexSweep>(std::move(piece)));
                    item_names.push_back(seg.string());
                } catch (const Error& e) {
                    add_diagnostic(ctx, diagnostics, fmt::format("{} [{}]", f.string(), w.label), e.what());
                }
            }
        } catch (const Error& e) {
            add_diagnostic(ctx, diagnostics, f.string(), e.what());
        }
    }

    std::vector<std::optional<circlefit::ResonanceFit>> fits(items.size());
    std::vector<std::string> errors(items.size());
    parallel_for(items.size(), ctx.global.jobs, [&](std::size_t i) {
        try {
            fits[i] = circlefit::fit_resonance(*items[i]);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const auto& mx = items[x]->meta();
        const auto& my = items[y]->meta();
        return std::tie(mx.chip_id, mx.resonator_id, mx.applied_power_dbm, item_names[x]) <
               std::tie(my.chip_id, my.resonator_id, my.applied_power_dbm, item_names[y]);
    });

    Json entries = Json::array();
    std::size_t ok = 0;
    for (const std::size_t i : order) {
        if (!fits[i]) {
            add_diagnostic(ctx, diagnostics, item_names[i], errors[i]);
            continue;
        }
        Json e = Json::object();
        e["input"] = report::provenance(items[i]->meta());
        e["fit"] = report::to_json(*fits[i]);
        entries.push_back(std::move(e));
        ++ok;
        ctx.out << fmt::format("{} {} {:+.2f} dBm  fr {:.6f} GHz  Qi {:.4g}  Ql {:.4g}  |Qc| {:.4g}\n",
                               items[i]->meta().chip_id, items[i]->meta().resonator_id,
                               items[i]->meta().applied_power_dbm, fits[i]->fr / 1e9, fits[i]->qi, fits[i]->ql,
                               fits[i]->qc_mag);
    }

    Json r = report::make_report("fit");
    if (!windows.empty()) r["windows_file"] = ctx.global.windows;
    r["entries"] = std::move(entries);
    r["diagnostics"] = diagnostics;
    report::write_report(r, ctx.global.out / "fit_report.json");
    return exit_code(ok, diagnostics.size());
}

int cmd_power(Context& ctx, const PowerArgs& a) {
    const auto files = collect_files(a.inputs, ".txt");
    if (files.empty()) throw DomainError("power: no input sweep files");
    if (a.curve_points < 2) throw DomainError("power: curve needs at least 2 samples");

    Json diagnostics = Json::array();
    using Key = std::pair<std::string, std::string>;  // chip, resonator
    std::map<Key, std::vector<dataio::ComplexSweep>> groups;
    for (const auto& f : files) {
        try {
            auto s = with_attenuation(dataio::parse_sweep_file(f), ctx.global.attenuation_db);
            groups[{s.meta().chip_id, s.meta().resonator_id}].push_back(std::move(s));
        } catch (const Error& e) {
            add_diagnostic(ctx, diagnostics, f.string(), e.what());
        }
    }

    std::vector<Key> keys;
    for (const auto& [k, v] : groups) keys.push_back(k);
    struct Outcome {
        std::optional<tlsloss::Series> series;
        std::optional<tlsloss::TlsFit> fit;
        std::string error;
    };
    std::vector<Outcome> outcomes(keys.size());
    parallel_for(keys.size(), ctx.global.jobs, [&](std::size_t i) {
        auto& o = outcomes[i];
        try {
            o.series = tlsloss::assemble_series(groups.at(keys[i]));
            o.fit = tlsloss::fit_tls(o.series->points);
        } catch (const Error& e) {
            o.error = e.what();
        }
    });

    Json entries = Json::array();
    std::size_t ok = 0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& [chip, res] = keys[i];
        const auto& sweeps = groups.at(keys[i]);
        const auto& o = outcomes[i];
        const std::string name = fmt::format("{}/{}", chip, res);
        if (o.series) {
            for (const auto& d : o.series->diagnostics) add_diagnostic(ctx, diagnostics, d.source, d.message);
        }
        if (!o.fit) {
            add_diagnostic(ctx, diagnostics, name, o.error);
            ++failed;
            continue;
        }
        ++ok;

        Json e = Json::object();
        e["chip_id"] = chip;
        e["resonator_id"] = res;
        const auto& m0 = sweeps.front().meta();
        e["process"] = m0.process ? Json(to_string(*m0.process)) : Json(nullptr);
        e["line_attenuation"] = report::quantity(m0.line_attenuation_db, "dB");
        Json sources = Json::array();
        for (const auto& s : sweeps) sources.push_back(s.meta().source);
        e["sources"] = std::move(sources);
        e["tls_fit"] = report::to_json(*o.fit);
        Json pts = Json::array();
        for (std::size_t k = 0; k < o.series->points.size(); ++k) {
            Json p = report::to_json(o.series->points[k]);
            p["resonance"] = report::to_json(o.series->fits[k]);
            pts.push_back(std::move(p));
        }
        e["points"] = std::move(pts);

        // Plot data: measured loss and the fitted curve.
        const std::string stem = fmt::format("{}__{}", chip, res);
        report::PlotData loss;
        loss.header = {{"chip_id", chip}, {"resonator_id", res}};
        loss.columns = {"n_photon", "delta", "sigma_delta"};
        for (const auto& p : o.series->points) loss.rows.push_back({p.n_photon, p.delta, p.sigma_delta});
        const fs::path loss_path = ctx.global.out / "plots" / (stem + "_loss.txt");
        report::write_plot_data(loss, loss_path);

        report::PlotData curve;
        curve.header = loss.header;
        curve.columns = {"n_photon", "delta_model"};
        const double n0 = o.series->points.front().n_photon;
        const double n1 = o.series->points.back().n_photon;
        for (std::size_t k = 0; k < a.curve_points; ++k) {
            const double n = n0 * std::pow(n1 / n0, static_cast<double>(k) / static_cast<double>(a.curve_points - 1));
            curve.rows.push_back({n, tlsloss::eval_tls_model(n, o.fit->delta_tls, o.fit->n_c, o.fit->beta,
                                                             o.fit->delta_hp)});
        }
        const fs::path curve_path = ctx.global.out / "plots" / (stem + "_curve.txt");
        report::write_plot_data(curve, curve_path);
        e["plot_files"] = Json::array({fs::relative(loss_path, ctx.global.out).generic_string(),
                                       fs::relative(curve_path, ctx.global.out).generic_string()});
        entries.push_back(std::move(e));

        ctx.out << fmt::format("{} {}: delta_tls {:.4g}  delta_lp {:.4g}  delta_hp {:.4g}  n_c {:.4g}  beta {:.3f}{}\n",
                               chip, res, o.fit->delta_tls, o.fit->delta_lp, o.fit->delta_hp, o.fit->n_c, o.fit->beta,
                               o.fit->beta_at_bound ? " (at bound)" : "");
    }

    Json r = report::make_report("power");
    r["entries"] = std::move(entries);
    r["diagnostics"] = diagnostics;
    report::write_report(r, ctx.global.out / "power_report.json");
    return exit_code(ok, failed + (diagnostics.empty() ? 0 : 1));
}

}  // namespace qloss::app
