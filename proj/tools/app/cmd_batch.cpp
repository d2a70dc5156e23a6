// budget, report and synth.

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>

#include "app.hpp"
#include "qloss/circlefit.hpp"
#include "qloss/dataio.hpp"
#include "qloss/error.hpp"
#include "qloss/filmchar.hpp"
#include "qloss/lossbudget.hpp"
#include "qloss/process.hpp"
#include "qloss/report.hpp"
#include "qloss/stats.hpp"
#include "qloss/synth.hpp"

namespace qloss::app {

namespace fs = std::filesystem;
using report::Json;

namespace {

lossbudget::InterfaceLosses read_losses_file(const fs::path& path) {
    const auto f = dataio::parse_column_file(path);
    if (f.rows.size() != 1) throw ParseError(f.path, 0, "loss-tangent file must hold exactly one row");
    return {f.number(0, f.column("delta_sa")), f.number(0, f.column("delta_ma")), f.number(0, f.column("delta_ms")),
            f.number(0, f.column("delta_si"))};
}

std::optional<std::size_t> find_column(const dataio::ColumnFile& f, const std::string& name) {
    const auto it = std::find(f.columns.begin(), f.columns.end(), name);
    if (it == f.columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - f.columns.begin());
}

}  // namespace

int cmd_budget(Context& ctx, const BudgetArgs& a) {
    const lossbudget::ParticipationTable table =
        a.table.empty() ? lossbudget::builtin_table() : lossbudget::parse_table_file(a.table);

    Json r = report::make_report("budget");
    Json t = Json::object();
    t["source"] = table.source;
    t["layer_thickness"] = report::quantity(table.layer_thickness_nm, "nm");
    t["conductor_width"] = report::quantity(table.conductor_width_um, "um");
    t["gap"] = report::quantity(table.gap_um, "um");
    Json rows = Json::array();
    for (const auto& row : table.rows) rows.push_back(report::to_json(row));
    t["rows"] = std::move(rows);
    r["participation_table"] = std::move(t);

    if (!a.observations.empty()) {
        const auto f = dataio::parse_column_file(a.observations);
        const std::size_t c_delta = f.column("delta_tls");
        const auto c_sigma = find_column(f, "sigma");
        const auto c_trench = find_column(f, "trench_nm");
        const bool explicit_p = find_column(f, "p_sa").has_value();
        if (!explicit_p && !c_trench) {
            throw ParseError(f.path, 0, "observations need either p_sa p_ma p_ms p_si or trench_nm columns");
        }
        std::vector<lossbudget::Observation> obs;
        for (std::size_t i = 0; i < f.rows.size(); ++i) {
            lossbudget::Observation o;
            if (explicit_p) {
                o.participation = {c_trench ? f.number(i, *c_trench) : 0.0, f.number(i, f.column("p_sa")),
                                   f.number(i, f.column("p_ma")), f.number(i, f.column("p_ms")),
                                   f.number(i, f.column("p_si"))};
            } else {
                o.participation = lossbudget::interpolate(table, f.number(i, *c_trench));
            }
            o.delta_tls = f.number(i, c_delta);
            o.sigma = c_sigma ? f.number(i, *c_sigma) : 0.0;
            obs.push_back(o);
        }
        const auto d = lossbudget::decompose(obs);
        r["mode"] = "decompose";
        r["observations_file"] = a.observations;
        r["decomposition"] = report::to_json(d);
        ctx.out << fmt::format("rank {}  condition {:.3g}\n", d.rank, d.condition_number);
        const auto vals = lossbudget::as_array(d.losses);
        const auto sigs = lossbudget::as_array(d.sigma);
        for (std::size_t i = 0; i < lossbudget::kInterfaces; ++i) {
            const auto name = lossbudget::to_string(static_cast<lossbudget::Interface>(i));
            if (d.unresolved[i]) {
                ctx.out << fmt::format("delta_{}: unresolved\n", name);
            } else {
                ctx.out << fmt::format("delta_{}: {:.4g} +- {:.2g}\n", name, vals[i], sigs[i]);
            }
        }
    } else {
        if (!ctx.global.trench_nm) throw DomainError("budget: --trench-nm is required for a forward evaluation");
        lossbudget::InterfaceLosses d;
        if (!a.losses.empty()) {
            d = read_losses_file(a.losses);
        } else if (a.delta.size() == lossbudget::kInterfaces) {
            d = {a.delta[0], a.delta[1], a.delta[2], a.delta[3]};
        } else {
            throw DomainError("budget: give --losses FILE or --delta SA,MA,MS,SI");
        }
        for (double x : lossbudget::as_array(d)) {
            if (!(x >= 0.0)) throw DomainError("budget: loss tangents must be non-negative");
        }
        const auto row = lossbudget::interpolate(table, *ctx.global.trench_nm);
        const double delta = lossbudget::forward_loss(row, d);
        r["mode"] = "forward";
        r["participation"] = report::to_json(row);
        r["interface_losses"] = report::to_json(d);
        r["delta_tls"] = report::quantity(delta, "dimensionless");
        ctx.out << fmt::format("trench {} nm: delta_tls = {:.6g}\n", row.trench_depth_nm, delta);
    }
    report::write_report(r, ctx.global.out / "budget_report.json");
    return kExitOk;
}

int cmd_report(Context& ctx, const ReportArgs& a) {
    const auto files = collect_files(a.inputs, ".json");
    Json diagnostics = Json::array();
    Json warnings = Json::array();

    struct Entry {
        ProcessKey key;
        std::string chip;
        std::string resonator;
        std::string source;
        double delta_tls;
        double delta_lp;
    };
    std::vector<Entry> entries;
    std::size_t reports = 0;
    for (const auto& f : files) {
        Json doc;
        try {
            doc = report::read_report(f);
        } catch (const Error& e) {
            add_diagnostic(ctx, diagnostics, f.string(), e.what());
            continue;
        }
        if (!doc.is_object() || doc.value("kind", std::string()) != "power") continue;
        ++reports;
        for (const auto& e : doc.value("entries", Json::array())) {
            const std::string name =
                fmt::format("{}:{}/{}", f.string(), e.value("chip_id", std::string()), e.value("resonator_id", std::string()));
            try {
                if (!e.contains("process") || e.at("process").is_null()) throw DomainError("entry has no process key");
                const auto key = parse_process_key(e.at("process").get<std::string>());
                const auto fit = report::tls_fit_from_json(e.at("tls_fit"));
                entries.push_back({key, e.value("chip_id", std::string()), e.value("resonator_id", std::string()),
                                   f.string(), fit.delta_tls, fit.delta_lp});
            } catch (const std::exception& ex) {
                add_diagnostic(ctx, diagnostics, name, ex.what());
            }
        }
    }
    if (reports == 0) throw DomainError("report: no power reports found under the given inputs");
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        return std::tie(x.key, x.chip, x.resonator, x.source) < std::tie(y.key, y.chip, y.resonator, y.source);
    });

    std::vector<stats::Sample> tls;
    std::vector<stats::Sample> lp;
    for (const auto& e : entries) {
        tls.push_back({e.key, e.delta_tls});
        lp.push_back({e.key, e.delta_lp});
    }
    const auto g_tls = stats::group_by_process(tls);
    const auto g_lp = stats::group_by_process(lp);

    Json groups = Json::array();
    for (const auto& [key, box] : g_tls.by_key) {
        Json g = Json::object();
        g["process"] = to_string(key);
        g["known_variation"] = is_known_process(key);
        const auto count = tabulated_resonator_count(key);
        g["tabulated_resonators"] = count ? Json(*count) : Json(nullptr);
        g["n"] = box.n;
        g["delta_tls"] = report::to_json(box);
        g["delta_lp"] = report::to_json(g_lp.by_key.at(key));
        if (!is_known_process(key)) {
            warnings.push_back(fmt::format("{} is not one of the fabricated variations", to_string(key)));
        }
        groups.push_back(std::move(g));
        ctx.out << fmt::format("{:<16} n={:<3} median delta_tls {:.4g}  median delta_lp {:.4g}\n", to_string(key),
                               box.n, box.median, g_lp.by_key.at(key).median);
    }

    const auto marginal = [](const auto& by_tls, const auto& by_lp) {
        Json m = Json::object();
        for (const auto& [k, box] : by_tls) {
            Json g = Json::object();
            g["n"] = box.n;
            g["delta_tls"] = report::to_json(box);
            g["delta_lp"] = report::to_json(by_lp.at(k));
            m[to_string(k)] = std::move(g);
        }
        return m;
    };
    Json marginals = Json::object();
    marginals["depo"] = marginal(g_tls.by_depo, g_lp.by_depo);
    marginals["etch"] = marginal(g_tls.by_etch, g_lp.by_etch);
    marginals["strip"] = marginal(g_tls.by_strip, g_lp.by_strip);

    Json list = Json::array();
    for (const auto& e : entries) {
        Json j = Json::object();
        j["process"] = to_string(e.key);
        j["chip_id"] = e.chip;
        j["resonator_id"] = e.resonator;
        j["source"] = e.source;
        j["delta_tls"] = report::quantity(e.delta_tls, "dimensionless");
        j["delta_lp"] = report::quantity(e.delta_lp, "dimensionless");
        list.push_back(std::move(j));
    }

    Json r = report::make_report("summary");
    r["entries"] = std::move(list);
    r["groups"] = std::move(groups);
    r["marginals"] = std::move(marginals);
    r["warnings"] = std::move(warnings);
    r["diagnostics"] = diagnostics;
    report::write_report(r, ctx.global.out / "summary_report.json");
    if (entries.empty()) return kExitError;
    return diagnostics.empty() ? kExitOk : kExitPartial;
}

namespace {

Json notch_json(const circlefit::NotchParams& p) {
    Json j = Json::object();
    j["fr"] = report::quantity(p.fr, "Hz");
    j["ql"] = report::quantity(p.ql, "dimensionless");
    j["qc_mag"] = report::quantity(p.qc_mag, "dimensionless");
    j["phi"] = report::quantity(p.phi, "rad");
    j["a"] = report::quantity(p.a, "dimensionless");
    j["alpha"] = report::quantity(p.alpha, "rad");
    j["tau"] = report::quantity(p.tau, "s");
    return j;
}

Json tls_json(const tlsloss::TlsParams& t) {
    Json j = Json::object();
    j["delta_tls"] = report::quantity(t.delta_tls, "dimensionless");
    j["delta_hp"] = report::quantity(t.delta_hp, "dimensionless");
    j["delta_lp"] = report::quantity(t.delta_tls + t.delta_hp, "dimensionless");
    j["n_c"] = report::quantity(t.n_c, "dimensionless");
    j["beta"] = report::quantity(t.beta, "dimensionless");
    return j;
}

Json truth_points(const std::vector<synth::TruthPoint>& pts, const std::vector<std::string>& files) {
    Json a = Json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Json j = Json::object();
        j["resonator_id"] = pts[i].resonator_id;
        j["applied_power"] = report::quantity(pts[i].applied_power_dbm, "dBm");
        j["n_photon"] = report::quantity(pts[i].n_photon, "dimensionless");
        j["qi"] = report::quantity(pts[i].qi, "dimensionless");
        j["ql"] = report::quantity(pts[i].ql, "dimensionless");
        if (!files.empty()) j["file"] = files[i];
        a.push_back(std::move(j));
    }
    return a;
}

}  // namespace

int cmd_synth(Context& ctx, const SynthArgs& a) {
    const fs::path out = ctx.global.out;
    const std::uint64_t seed = ctx.global.seed;
    std::optional<ProcessKey> process;
    if (!a.process.empty()) process = parse_process_key(a.process);
    const double attenuation = ctx.global.attenuation_db.value_or(70.0);
    const tlsloss::TlsParams tls{a.delta_tls, a.n_c, a.beta, a.delta_hp};

    Json truth = report::make_report("synth_truth");
    truth["synth_kind"] = a.kind;
    truth["seed"] = seed;
    truth["noise_sigma"] = a.noise;

    if (a.kind == "notch") {
        const circlefit::NotchParams p{a.fr, a.ql, a.qc, a.phi, a.a, a.alpha, a.tau};
        dataio::SweepMetadata meta;
        meta.applied_power_dbm = a.power_dbm;
        meta.line_attenuation_db = attenuation;
        meta.resonator_id = a.resonator_id;
        meta.chip_id = a.chip_id.empty() ? "synthetic" : a.chip_id;
        meta.process = process;
        const auto grid = circlefit::linewidth_grid(a.fr, a.ql, a.span_linewidths, a.points);
        const auto sweep = circlefit::synthesize_notch(p, grid, a.noise, seed, meta);
        dataio::write_sweep_file(sweep, out / "notch.txt");
        truth["resonator"] = notch_json(p);
        truth["qi"] = report::quantity(circlefit::internal_q(a.ql, a.qc, a.phi), "dimensionless");
        truth["files"] = Json::array({"notch.txt"});
    } else if (a.kind == "power_series") {
        synth::PowerSeriesSpec spec;
        spec.resonator = {a.fr, 0.0, a.qc, a.phi, a.a, a.alpha, a.tau};
        spec.tls = tls;
        spec.attenuation_db = attenuation;
        spec.powers_dbm = synth::power_grid(a.fr, a.qc, a.phi, tls, attenuation, 1e-2, 1e6, a.powers);
        spec.points = a.points;
        spec.span_linewidths = a.span_linewidths;
        spec.noise_sigma = a.noise;
        spec.resonator_id = a.resonator_id;
        spec.chip_id = a.chip_id.empty() ? "synthetic" : a.chip_id;
        spec.process = process;
        const auto series = synth::synthesize_power_series(spec, seed);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < series.sweeps.size(); ++k) {
            names.push_back(fmt::format("{}_p{:02}.txt", a.resonator_id, k));
            dataio::write_sweep_file(series.sweeps[k], out / names.back());
        }
        truth["resonator"] = notch_json(spec.resonator);
        truth["tls"] = tls_json(tls);
        truth["line_attenuation"] = report::quantity(attenuation, "dB");
        truth["points"] = truth_points(series.truth, names);
    } else if (a.kind == "feedline") {
        synth::FeedlineSpec spec;
        if (!a.frequencies.empty()) {
            std::size_t k = 0;
            for (double f : a.frequencies) {
                synth::FeedlineResonator res;
                res.id = fmt::format("R{}", ++k);
                res.fr = f;
                res.qc_mag = a.qc;
                res.phi = a.phi;
                res.tls = tls;
                spec.resonators.push_back(res);
            }
        } else {
            spec.resonators = synth::default_feedline_resonators(seed, a.resonators, a.f_first, a.spacing);
        }
        spec.a = a.a;
        spec.alpha = a.alpha;
        spec.tau = a.tau;
        spec.attenuation_db = attenuation;
        spec.noise_sigma = a.noise;
        spec.chip_id = a.chip_id.empty() ? "synthetic-chip" : a.chip_id;
        spec.process = process;
        if (a.powers != 12) {
            const auto& mid = spec.resonators[spec.resonators.size() / 2];
            spec.powers_dbm = synth::power_grid(mid.fr, mid.qc_mag, mid.phi, mid.tls, attenuation, 1e-2, 1e6, a.powers);
        }
        const auto line = synth::synthesize_feedline(spec, seed);
        Json files = Json::array();
        for (std::size_t k = 0; k < line.sweeps.size(); ++k) {
            const std::string name = fmt::format("feedline_p{:02}.txt", k);
            dataio::write_sweep_file(line.sweeps[k], out / name);
            files.push_back(name);
        }
        Json res = Json::array();
        for (const auto& r : line.resonators) {
            Json j = Json::object();
            j["resonator_id"] = r.id;
            j["fr"] = report::quantity(r.fr, "Hz");
            j["qc_mag"] = report::quantity(r.qc_mag, "dimensionless");
            j["phi"] = report::quantity(r.phi, "rad");
            j["tls"] = tls_json(r.tls);
            res.push_back(std::move(j));
        }
        truth["chip_id"] = spec.chip_id;
        truth["process"] = process ? Json(to_string(*process)) : Json(nullptr);
        truth["line_attenuation"] = report::quantity(attenuation, "dB");
        truth["resonators"] = std::move(res);
        truth["files"] = std::move(files);
        truth["points"] = truth_points(line.truth, {});
    } else if (a.kind == "rt") {
        const filmchar::RtSpec spec{a.tc, a.width, a.r_normal, a.rrr, a.noise};
        const auto sweep = filmchar::synthesize_rt(spec, seed);
        dataio::write_rt_file(sweep, out / "rt.txt");
        truth["tc"] = report::quantity(spec.tc, "K");
        truth["transition_width"] = report::quantity(spec.width, "K");
        truth["r_normal"] = report::quantity(spec.r_normal, "ohm");
        truth["rrr"] = report::quantity(spec.rrr, "dimensionless");
        truth["files"] = Json::array({"rt.txt"});
    } else if (a.kind == "xrd") {
        const std::size_t n = a.centers.size();
        if (a.fwhms.size() != n || a.amplitudes.size() != n || a.etas.size() != n) {
            throw DomainError("synth xrd: --center, --fwhm, --amplitude and --eta need the same number of values");
        }
        std::vector<filmchar::PeakSpec> peaks;
        Json pj = Json::array();
        for (std::size_t i = 0; i < n; ++i) {
            peaks.push_back({a.centers[i], a.fwhms[i], a.amplitudes[i], a.etas[i]});
            Json j = Json::object();
            j["center"] = report::quantity(a.centers[i], "deg");
            j["fwhm"] = report::quantity(a.fwhms[i], "deg");
            j["amplitude"] = report::quantity(a.amplitudes[i], "counts");
            j["eta"] = report::quantity(a.etas[i], "dimensionless");
            pj.push_back(std::move(j));
        }
        const auto scan = filmchar::synthesize_xrd(peaks, a.two_theta_lo, a.two_theta_hi, a.step, a.background, 0.0,
                                                   a.noise, seed);
        dataio::write_xrd_file(scan, out / "xrd.txt");
        truth["peaks"] = std::move(pj);
        truth["background"] = report::quantity(a.background, "counts");
        truth["files"] = Json::array({"xrd.txt"});
    } else {
        throw DomainError(fmt::format("synth: unknown kind '{}' (notch, power_series, feedline, rt, xrd)", a.kind));
    }
    report::write_report(truth, out / "truth.json");
    ctx.out << fmt::format("wrote {} data to {}\n", a.kind, out.string());
    return kExitOk;
}

}  // namespace qloss::app
