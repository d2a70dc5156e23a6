#include "qloss/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "qloss/error.hpp"

#ifndef QLOSS_VERSION
#define QLOSS_VERSION "0.0.0"
#endif

namespace qloss::report {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json string_list(const std::vector<std::string>& v) {
    Json a = Json::array();
    for (const auto& s : v) a.push_back(s);
    return a;
}

std::vector<std::string> strings_of(const Json& j, const char* key) {
    std::vector<std::string> out;
    if (j.contains(key)) {
        for (const auto& s : j.at(key)) out.push_back(s.get<std::string>());
    }
    return out;
}

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw DomainError(fmt::format("report object lacks '{}'", key));
    return j.at(key);
}

double val(const Json& j, const char* key) { return value_of(field(j, key)); }
double sig(const Json& j, const char* key) { return sigma_of(field(j, key)); }

}  // namespace

std::string version() { return QLOSS_VERSION; }

Json quantity(double value, std::string_view unit, std::optional<double> sigma) {
    Json q = Json::object();
    q["value"] = number(value);
    q["unit"] = std::string(unit);
    if (sigma) q["sigma"] = number(*sigma);
    return q;
}

double value_of(const Json& q) {
    if (q.is_null()) return kNaN;
    if (q.is_number()) return q.get<double>();
    if (q.is_object() && q.contains("value")) return value_of(q.at("value"));
    throw DomainError("expected a number or a quantity object");
}

double sigma_of(const Json& q) {
    if (q.is_object() && q.contains("sigma")) return value_of(q.at("sigma"));
    return kNaN;
}

Json design_constants() {
    Json d = Json::object();
    d["conductor_width"] = quantity(10.0, "um");
    d["gap"] = quantity(6.0, "um");
    d["target_coupling_bandwidth"] = quantity(0.36, "MHz");
    d["target_external_q"] = quantity(5e5, "dimensionless");
    d["resonator_spacing"] = quantity(200.0, "MHz");
    return d;
}

Json make_report(std::string_view kind) {
    Json r = Json::object();
    r["kind"] = std::string(kind);
    r["generator"] = "qloss " + version();
    r["design"] = design_constants();
    return r;
}

Json provenance(const dataio::SweepMetadata& meta) {
    Json p = Json::object();
    p["source"] = meta.source;
    p["resonator_id"] = meta.resonator_id;
    p["chip_id"] = meta.chip_id;
    p["process"] = meta.process ? Json(to_string(*meta.process)) : Json(nullptr);
    p["applied_power"] = quantity(meta.applied_power_dbm, "dBm");
    p["line_attenuation"] = quantity(meta.line_attenuation_db, "dB");
    p["temperature"] = meta.temperature_k ? quantity(*meta.temperature_k, "K") : Json(nullptr);
    Json extra = Json::object();
    for (const auto& [k, v] : meta.extra) extra[k] = v;
    p["header"] = std::move(extra);
    return p;
}

Json to_json(const circlefit::ResonanceFit& f) {
    Json j = Json::object();
    j["fr"] = quantity(f.fr, "Hz", f.sigma.fr);
    j["ql"] = quantity(f.ql, "dimensionless", f.sigma.ql);
    j["qc_mag"] = quantity(f.qc_mag, "dimensionless", f.sigma.qc_mag);
    j["phi"] = quantity(f.phi, "rad", f.sigma.phi);
    j["qi"] = quantity(f.qi, "dimensionless", f.sigma.qi);
    j["a"] = quantity(f.a, "dimensionless", f.sigma.a);
    j["alpha"] = quantity(f.alpha, "rad", f.sigma.alpha);
    j["tau"] = quantity(f.tau, "s", f.sigma.tau);
    j["rms_residual"] = quantity(f.rms_residual, "dimensionless");
    j["iterations"] = f.iterations;
    j["warnings"] = string_list(f.warnings);
    return j;
}

circlefit::ResonanceFit resonance_fit_from_json(const Json& j) {
    circlefit::ResonanceFit f;
    f.fr = val(j, "fr");
    f.ql = val(j, "ql");
    f.qc_mag = val(j, "qc_mag");
    f.phi = val(j, "phi");
    f.qi = val(j, "qi");
    f.a = val(j, "a");
    f.alpha = val(j, "alpha");
    f.tau = val(j, "tau");
    f.sigma = {sig(j, "fr"), sig(j, "ql"), sig(j, "qc_mag"), sig(j, "phi"),
               sig(j, "qi"), sig(j, "a"),  sig(j, "alpha"),  sig(j, "tau")};
    f.rms_residual = val(j, "rms_residual");
    f.iterations = j.value("iterations", 0);
    f.warnings = strings_of(j, "warnings");
    return f;
}

Json to_json(const tlsloss::TlsFit& f) {
    Json j = Json::object();
    j["delta_tls"] = quantity(f.delta_tls, "dimensionless", f.sigma.delta_tls);
    j["delta_lp"] = quantity(f.delta_lp, "dimensionless", f.sigma.delta_lp);
    j["delta_hp"] = quantity(f.delta_hp, "dimensionless", f.sigma.delta_hp);
    j["n_c"] = quantity(f.n_c, "dimensionless", f.sigma.n_c);
    j["beta"] = quantity(f.beta, "dimensionless", f.sigma.beta);
    j["beta_at_bound"] = f.beta_at_bound;
    j["rms_residual"] = quantity(f.rms_residual, "dimensionless");
    j["points"] = f.points;
    j["iterations"] = f.iterations;
    j["warnings"] = string_list(f.warnings);
    return j;
}

tlsloss::TlsFit tls_fit_from_json(const Json& j) {
    tlsloss::TlsFit f;
    f.delta_tls = val(j, "delta_tls");
    f.delta_hp = val(j, "delta_hp");
    f.delta_lp = val(j, "delta_lp");
    f.n_c = val(j, "n_c");
    f.beta = val(j, "beta");
    f.sigma = {sig(j, "delta_tls"), sig(j, "delta_hp"), sig(j, "delta_lp"), sig(j, "n_c"), sig(j, "beta")};
    f.beta_at_bound = j.value("beta_at_bound", false);
    f.rms_residual = val(j, "rms_residual");
    f.points = j.value("points", std::size_t{0});
    f.iterations = j.value("iterations", 0);
    f.warnings = strings_of(j, "warnings");
    return f;
}

Json to_json(const tlsloss::LossPoint& p) {
    Json j = Json::object();
    j["n_photon"] = quantity(p.n_photon, "dimensionless");
    j["delta"] = quantity(p.delta, "dimensionless", p.sigma_delta);
    j["applied_power"] = quantity(p.applied_power_dbm, "dBm");
    j["source"] = p.source;
    return j;
}

tlsloss::LossPoint loss_point_from_json(const Json& j) {
    tlsloss::LossPoint p;
    p.n_photon = val(j, "n_photon");
    p.delta = val(j, "delta");
    p.sigma_delta = sig(j, "delta");
    p.applied_power_dbm = val(j, "applied_power");
    p.source = j.value("source", std::string());
    return p;
}

Json to_json(const stats::BoxSummary& b) {
    Json j = Json::object();
    j["n"] = b.n;
    j["median"] = number(b.median);
    j["q1"] = number(b.q1);
    j["q3"] = number(b.q3);
    j["iqr"] = number(b.iqr);
    j["lower_fence"] = number(b.lower_fence);
    j["upper_fence"] = number(b.upper_fence);
    j["whisker_low"] = number(b.whisker_low);
    j["whisker_high"] = number(b.whisker_high);
    Json o = Json::array();
    for (double x : b.outliers) o.push_back(number(x));
    j["outliers"] = std::move(o);
    return j;
}

stats::BoxSummary box_summary_from_json(const Json& j) {
    stats::BoxSummary b;
    b.n = field(j, "n").get<std::size_t>();
    b.median = val(j, "median");
    b.q1 = val(j, "q1");
    b.q3 = val(j, "q3");
    b.iqr = val(j, "iqr");
    b.lower_fence = val(j, "lower_fence");
    b.upper_fence = val(j, "upper_fence");
    b.whisker_low = val(j, "whisker_low");
    b.whisker_high = val(j, "whisker_high");
    for (const auto& x : field(j, "outliers")) b.outliers.push_back(value_of(x));
    return b;
}

Json to_json(const lossbudget::ParticipationRow& p) {
    Json j = Json::object();
    j["trench_depth"] = quantity(p.trench_depth_nm, "nm");
    j["p_sa"] = quantity(p.p_sa, "dimensionless");
    j["p_ma"] = quantity(p.p_ma, "dimensionless");
    j["p_ms"] = quantity(p.p_ms, "dimensionless");
    j["p_si"] = quantity(p.p_si, "dimensionless");
    return j;
}

Json to_json(const lossbudget::InterfaceLosses& d, const lossbudget::InterfaceLosses* s) {
    const auto q = [&](double v, double sv) {
        return s ? quantity(v, "dimensionless", sv) : quantity(v, "dimensionless");
    };
    const lossbudget::InterfaceLosses none{};
    const auto& sg = s ? *s : none;
    Json j = Json::object();
    j["delta_sa"] = q(d.delta_sa, sg.delta_sa);
    j["delta_ma"] = q(d.delta_ma, sg.delta_ma);
    j["delta_ms"] = q(d.delta_ms, sg.delta_ms);
    j["delta_si"] = q(d.delta_si, sg.delta_si);
    return j;
}

Json to_json(const lossbudget::Decomposition& d) {
    Json j = Json::object();
    j["losses"] = to_json(d.losses, &d.sigma);
    Json u = Json::array();
    for (std::size_t i = 0; i < lossbudget::kInterfaces; ++i) {
        if (d.unresolved[i]) u.push_back(lossbudget::to_string(static_cast<lossbudget::Interface>(i)));
    }
    j["unresolved"] = std::move(u);
    j["rank"] = d.rank;
    j["condition_number"] = number(d.condition_number);
    j["resolved_condition_number"] = number(d.resolved_condition_number);
    j["rms_residual"] = number(d.rms_residual);
    return j;
}

Json to_json(const filmchar::PeakFit& p) {
    Json j = Json::object();
    j["center"] = quantity(p.center, "deg", p.sigma.center);
    j["fwhm"] = quantity(p.fwhm, "deg", p.sigma.fwhm);
    j["amplitude"] = quantity(p.amplitude, "counts", p.sigma.amplitude);
    j["eta"] = quantity(p.eta, "dimensionless", p.sigma.eta);
    j["baseline_intercept"] = quantity(p.baseline_intercept, "counts", p.sigma.baseline_intercept);
    j["baseline_slope"] = quantity(p.baseline_slope, "counts/deg", p.sigma.baseline_slope);
    j["window"] = Json::array({p.window.lo, p.window.hi});
    j["rms_residual"] = quantity(p.rms_residual, "counts");
    j["iterations"] = p.iterations;
    return j;
}

filmchar::PeakFit peak_fit_from_json(const Json& j) {
    filmchar::PeakFit p;
    p.center = val(j, "center");
    p.fwhm = val(j, "fwhm");
    p.amplitude = val(j, "amplitude");
    p.eta = val(j, "eta");
    p.baseline_intercept = val(j, "baseline_intercept");
    p.baseline_slope = val(j, "baseline_slope");
    p.sigma = {sig(j, "center"), sig(j, "fwhm"), sig(j, "amplitude"),
               sig(j, "eta"),    sig(j, "baseline_intercept"), sig(j, "baseline_slope")};
    const auto& w = field(j, "window");
    p.window = {w.at(0).get<double>(), w.at(1).get<double>()};
    p.rms_residual = val(j, "rms_residual");
    p.iterations = j.value("iterations", 0);
    return p;
}

Json to_json(const filmchar::OrientationResult& o) {
    Json j = Json::object();
    j["orientation"] = filmchar::to_string(o.orientation);
    j["shift_111"] = o.shift_111 ? quantity(*o.shift_111, "deg") : Json(nullptr);
    j["shift_200"] = o.shift_200 ? quantity(*o.shift_200, "deg") : Json(nullptr);
    return j;
}

Json to_json(const filmchar::SheetStats& s) {
    Json j = Json::object();
    j["wafers"] = s.wafers;
    j["mean"] = quantity(s.mean, "ohm/sq");
    j["max_wafer_sigma"] = quantity(s.max_wafer_sigma_pct, "%");
    j["max_pointwise_sigma"] = quantity(s.max_pointwise_sigma_pct, "%");
    Json w = Json::array();
    for (const auto& x : s.per_wafer) {
        Json e = Json::object();
        e["wafer_id"] = x.wafer_id;
        e["mean"] = quantity(x.mean, "ohm/sq");
        e["sigma"] = quantity(x.sigma_pct, "%");
        w.push_back(std::move(e));
    }
    j["per_wafer"] = std::move(w);
    return j;
}

Json to_json(const filmchar::TcResult& t) {
    Json j = Json::object();
    j["tc"] = quantity(t.tc, "K");
    j["transition_width"] = quantity(t.transition_width, "K");
    j["t_onset"] = quantity(t.t_onset, "K");
    j["r_normal"] = quantity(t.r_normal, "ohm");
    j["r_300k"] = quantity(t.r_300k, "ohm");
    j["rrr"] = quantity(t.rrr, "dimensionless");
    j["warnings"] = string_list(t.warnings);
    return j;
}

filmchar::TcResult tc_result_from_json(const Json& j) {
    filmchar::TcResult t;
    t.tc = val(j, "tc");
    t.transition_width = val(j, "transition_width");
    t.t_onset = val(j, "t_onset");
    t.r_normal = val(j, "r_normal");
    t.r_300k = val(j, "r_300k");
    t.rrr = val(j, "rrr");
    t.warnings = strings_of(j, "warnings");
    return t;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_report(const Json& j, const std::filesystem::path& path) { dataio::write_text_file(path, dump(j)); }

Json read_report(const std::filesystem::path& path) {
    const std::string text = dataio::read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string(), 0, fmt::format("invalid JSON: {}", e.what()));
    }
}

std::string format_plot_data(const PlotData& data) {
    if (data.columns.empty()) throw DomainError("plot data needs at least one column");
    std::string out;
    for (const auto& [k, v] : data.header) out += fmt::format("#{}={}\n", k, v);
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        out += (i ? " " : "") + data.columns[i];
    }
    out += "\n";
    for (const auto& row : data.rows) {
        if (row.size() != data.columns.size()) throw DomainError("plot data row width differs from column count");
        for (std::size_t i = 0; i < row.size(); ++i) out += fmt::format("{}{:.17g}", i ? " " : "", row[i]);
        out += "\n";
    }
    return out;
}

void write_plot_data(const PlotData& data, const std::filesystem::path& path) {
    dataio::write_text_file(path, format_plot_data(data));
}

}  // namespace qloss::report
