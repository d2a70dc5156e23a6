// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any fails.

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "app/app.hpp"
#include "box_oracle.hpp"
#include "qloss/circlefit.hpp"
#include "qloss/dataio.hpp"
#include "qloss/error.hpp"
#include "qloss/filmchar.hpp"
#include "qloss/lossbudget.hpp"
#include "qloss/report.hpp"
#include "qloss/stats.hpp"
#include "qloss/tlsloss.hpp"
#include "support.hpp"

using namespace qloss;
using test::rel_err;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back(what);
        }
    }
};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Relative error with a floor for parameters whose truth can sit at zero.
double scaled_err(double got, double want, double floor) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

Outcome circle_fit_round_trip() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };

    std::vector<circlefit::NotchParams> cases;
    while (cases.size() < 200) {
        circlefit::NotchParams p;
        p.fr = 4e9 + 4e9 * u(rng);
        p.ql = log_uniform(1e4, 5e5);
        p.qc_mag = log_uniform(2e4, 1e6);
        p.phi = -0.5 + u(rng);
        p.tau = 100e-9 * u(rng);
        p.a = 0.5 + u(rng);
        p.alpha = std::numbers::pi * (2.0 * u(rng) - 1.0);
        if (!(1.0 / p.ql - std::cos(p.phi) / p.qc_mag > 0.0)) continue;  // Qi must be positive
        cases.push_back(p);
    }

    double worst = 0.0;
    std::vector<double> qi_err;
    std::size_t failures = 0;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto& p = cases[k];
        const double qi = circlefit::internal_q(p.ql, p.qc_mag, p.phi);
        const auto grid = circlefit::linewidth_grid(p.fr, p.ql, 10.0, 1001);
        try {
            const auto fit = circlefit::fit_resonance(circlefit::synthesize_notch(p, grid, 0.0, k));
            const std::array<double, 8> e{rel_err(fit.fr, p.fr),
                                          rel_err(fit.ql, p.ql),
                                          rel_err(fit.qc_mag, p.qc_mag),
                                          scaled_err(fit.phi, p.phi, 0.01),
                                          rel_err(fit.a, p.a),
                                          scaled_err(fit.alpha, p.alpha, 0.01),
                                          scaled_err(fit.tau, p.tau, 1e-9),
                                          rel_err(fit.qi, qi)};
            worst = std::max(worst, *std::max_element(e.begin(), e.end()));

            const auto noisy = circlefit::fit_resonance(circlefit::synthesize_notch(p, grid, 1e-3, 1000 + k));
            qi_err.push_back(rel_err(noisy.qi, qi));
        } catch (const std::exception& ex) {
            ++failures;
            out.notes.push_back(fmt::format("case {} threw: {}", k, ex.what()));
        }
    }
    const double elapsed = seconds_since(t0);
    const double med = qi_err.empty() ? INFINITY : median_of(qi_err);
    out.require(failures == 0, fmt::format("{} fits threw", failures));
    out.require(worst <= 1e-4, fmt::format("worst noiseless parameter error {:.3g} > 1e-4", worst));
    out.require(med < 0.01, fmt::format("median noisy Qi error {:.3g} >= 1%", med));
    out.require(elapsed < 30.0, fmt::format("runtime {:.1f} s >= 30 s", elapsed));
    out.notes.push_back(
        fmt::format("200 sweeps, worst noiseless error {:.2g}, median Qi error at 1e-3 noise {:.3g}, {:.1f} s", worst,
                    med, elapsed));
    return out;
}

std::vector<tlsloss::LossPoint> tls_series(const tlsloss::TlsParams& p, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<tlsloss::LossPoint> out;
    for (int i = 0; i < 20; ++i) {
        tlsloss::LossPoint lp;
        lp.n_photon = 1e-2 * std::pow(1e8, i / 19.0);
        lp.delta = tlsloss::eval_tls_model(lp.n_photon, p) * (1.0 + noise * n(rng));
        out.push_back(lp);
    }
    return out;
}

Outcome tls_fit_round_trip() {
    Outcome out;
    bool identity = true;
    const std::vector<tlsloss::TlsParams> truths{
        {2e-6, 10.0, 0.5, 1e-6}, {9.67e-7, 3.0, 0.3, 5e-8}, {1.104e-6, 50.0, 0.8, 2e-7}, {5e-6, 1.0, 0.2, 1e-7}};
    double worst = 0.0;
    for (const auto& t : truths) {
        const auto fit = tlsloss::fit_tls(tls_series(t, 0.0, 0));
        worst = std::max({worst, rel_err(fit.delta_tls, t.delta_tls), rel_err(fit.delta_hp, t.delta_hp),
                          rel_err(fit.n_c, t.n_c), rel_err(fit.beta, t.beta)});
        identity = identity && fit.delta_lp - fit.delta_hp == fit.delta_tls;
    }
    std::vector<double> err;
    const tlsloss::TlsParams t{2e-6, 10.0, 0.5, 1e-6};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto fit = tlsloss::fit_tls(tls_series(t, 0.03, seed));
        err.push_back(rel_err(fit.delta_tls, t.delta_tls));
        identity = identity && fit.delta_lp - fit.delta_hp == fit.delta_tls;
    }
    const double med = median_of(err);
    out.require(worst <= 1e-6, fmt::format("worst noiseless error {:.3g} > 1e-6", worst));
    out.require(med < 0.10, fmt::format("median delta_tls error at 3% noise {:.3g} >= 10%", med));
    out.require(identity, "delta_lp - delta_hp != delta_tls on some output");
    out.notes.push_back(fmt::format("worst noiseless error {:.2g}, median noisy error {:.3g}, identity exact", worst, med));
    return out;
}

Outcome loss_budget() {
    Outcome out;
    const auto& t = lossbudget::builtin_table();
    const double fwd = lossbudget::forward_loss(t.rows.at(0), {1e-3, 1e-3, 1e-3, 1e-7});
    out.require(rel_err(fwd, 1.0162e-6) <= 1e-4, fmt::format("forward loss {:.6g} not 1.0162e-6", fwd));

    const std::array<std::array<double, 5>, 3> table{
        {{0.0, 2.83e-4, 4.95e-5, 5.93e-4, 0.907}, {50.0, 2.67e-4, 2.08e-5, 5.45e-4, 0.905},
         {100.0, 2.51e-4, 1.77e-5, 5.04e-4, 0.903}}};
    bool exact = t.rows.size() == table.size();
    for (std::size_t i = 0; exact && i < table.size(); ++i) {
        const auto& r = t.rows[i];
        exact = r.trench_depth_nm == table[i][0] && r.p_sa == table[i][1] && r.p_ma == table[i][2] &&
                r.p_ms == table[i][3] && r.p_si == table[i][4];
    }
    out.require(exact, "bundled participation table differs from the reference values");

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<lossbudget::Observation> obs;
        const lossbudget::InterfaceLosses d{1e-3 * (0.1 + u(rng)), 1e-3 * (0.1 + u(rng)), 1e-3 * (0.1 + u(rng)),
                                            1e-7 * (0.1 + u(rng))};
        for (int i = 0; i < 4 + trial % 5; ++i) {
            const lossbudget::ParticipationRow p{0, 1e-3 * u(rng), 1e-4 * u(rng), 1e-3 * u(rng), 0.2 + 0.7 * u(rng)};
            obs.push_back({p, lossbudget::forward_loss(p, d), 0.0});
        }
        const auto dec = lossbudget::decompose(obs);
        if (dec.rank != 4) {
            out.require(false, fmt::format("trial {} rank {}", trial, dec.rank));
            continue;
        }
        const auto got = lossbudget::as_array(dec.losses);
        const auto want = lossbudget::as_array(d);
        for (std::size_t k = 0; k < lossbudget::kInterfaces; ++k) worst = std::max(worst, rel_err(got[k], want[k]));
    }
    out.require(worst <= 1e-8, fmt::format("decompose round trip error {:.3g} > 1e-8", worst));
    out.notes.push_back(fmt::format("forward {:.6g}, table exact, worst round trip {:.2g}", fwd, worst));
    return out;
}

Outcome photon_number() {
    Outcome out;
    const double n = tlsloss::photon_number(6e9, 5e4, 1e5, 1e-17);
    out.require(rel_err(n, 3.34) < 0.01, fmt::format("<n> = {:.6g}, not 3.34 within 1%", n));
    double worst = 0.0;
    for (double c : {0.1, 2.0, 7.5, 1e3}) {
        worst = std::max(worst, rel_err(tlsloss::photon_number(6e9, 5e4, 1e5, c * 1e-17), c * n));
        worst = std::max(worst, rel_err(tlsloss::photon_number(6e9, c * 5e4, 1e5, 1e-17), c * c * n));
    }
    out.require(worst <= 1e-12, fmt::format("scaling error {:.3g} > 1e-12", worst));
    out.notes.push_back(fmt::format("<n> = {:.6g}, worst scaling error {:.2g}", n, worst));
    return out;
}

Outcome xrd() {
    Outcome out;
    using namespace filmchar;
    const auto scan = [](std::vector<PeakSpec> peaks) { return synthesize_xrd(peaks, 30.0, 50.0, 0.01, 20.0, 0.1, 0.0, 1); };
    double worst = 0.0;
    for (double eta : {0.0, 0.3, 0.7, 1.0}) {
        const auto fit = fit_peak(scan({{36.9, 0.4, 800.0, eta}}), default_windows()[0]);
        worst = std::max({worst, rel_err(fit.center, 36.9), rel_err(fit.fwhm, 0.4), rel_err(fit.amplitude, 800.0),
                          std::abs(fit.eta - eta)});
    }
    out.require(worst <= 1e-6, fmt::format("worst peak parameter error {:.3g} > 1e-6", worst));

    // Windows without a peak are skipped, as the xrd command does.
    const auto classify = [&](std::vector<PeakSpec> peaks) {
        const auto s = scan(peaks);
        std::vector<PeakFit> fits;
        for (const auto& w : default_windows()) {
            try {
                fits.push_back(fit_peak(s, w));
            } catch (const NoPeakError&) {
            }
        }
        return classify_orientation(fits).orientation;
    };
    const auto o111 = classify({{36.9, 0.4, 800.0, 0.5}});
    const auto o200 = classify({{42.8, 0.4, 800.0, 0.5}});
    const auto mixed = classify({{36.9, 0.4, 800.0, 0.5}, {42.8, 0.4, 500.0, 0.5}});
    out.require(o111 == Orientation::TiN111, "36.9 deg peak not classified TiN111");
    out.require(o200 == Orientation::TiN200, "42.8 deg peak not classified TiN200");
    out.require(mixed == Orientation::Mixed, "two-peak scan not classified Mixed");

    PeakFit a;
    a.center = 36.9;
    a.fwhm = 0.25;
    PeakFit b;
    b.center = 42.8;
    b.fwhm = 1.0;
    const double ratio = scherrer_ratio(a, b);
    out.require(std::abs(ratio - 3.926) <= 1e-3, fmt::format("Scherrer ratio {:.5f} not 3.926", ratio));
    out.notes.push_back(fmt::format("worst peak error {:.2g}, {}/{}/{}, Scherrer ratio {:.4f}", worst, to_string(o111),
                                    to_string(o200), to_string(mixed), ratio));
    return out;
}

Outcome rrr_tc() {
    Outcome out;
    std::vector<double> t;
    std::vector<double> r;
    for (double x = 1.0; x <= 300.0; x += 0.5) {
        t.push_back(x);
        r.push_back(x < 4.5 ? 0.0 : x < 5.0 ? 12.5 : x <= 20.0 ? 25.0 : 25.0 + 75.0 * (x - 20.0) / 280.0);
    }
    const auto trivial = filmchar::extract_tc_rrr(dataio::RtSweep(t, r));
    out.require(trivial.rrr == 4.0, fmt::format("rrr {:.17g} is not exactly 4", trivial.rrr));

    double worst = 0.0;
    for (int k = 0; k <= 10; ++k) {
        filmchar::RtSpec spec;
        spec.tc = 4.2 + 0.1 * k;
        const auto res = filmchar::extract_tc_rrr(filmchar::synthesize_rt(spec, 50 + k));
        worst = std::max(worst, std::abs(res.tc - spec.tc));
    }
    out.require(worst < 0.01, fmt::format("worst tc error {:.4f} K >= 0.01 K", worst));
    out.notes.push_back(fmt::format("rrr = {}, worst tc error {:.2g} K over 4.2-5.2 K", trivial.rrr, worst));
    return out;
}

Outcome statistics() {
    Outcome out;
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b) + 1e-24; };
    std::size_t matched = 0;
    for (const auto& o : test::kBoxOracles) {
        const auto b = stats::box_summary(o.values);
        if (close(b.median, o.median) && close(b.q1, o.q1) && close(b.q3, o.q3) &&
            close(b.whisker_low, o.whisker_low) && close(b.whisker_high, o.whisker_high) && b.outliers == o.outliers) {
            ++matched;
        }
    }
    out.require(matched == test::kBoxOracles.size(),
                fmt::format("{} of {} oracle vectors match", matched, test::kBoxOracles.size()));

    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> len(1, 80);
    std::lognormal_distribution<double> ln(0.0, 1.5);
    std::size_t partition_ok = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto& x : v) x = ln(rng);
        const auto b = stats::box_summary(v);
        std::vector<double> rebuilt = b.outliers;
        for (double x : v) {
            if (x >= b.lower_fence && x <= b.upper_fence) rebuilt.push_back(x);
        }
        std::sort(v.begin(), v.end());
        std::sort(rebuilt.begin(), rebuilt.end());
        if (rebuilt == v) ++partition_ok;
    }
    out.require(partition_ok == 1000, fmt::format("partition holds on {} of 1000 vectors", partition_ok));

    const auto cmp = stats::compare_medians(stats::box_summary(std::vector<double>{9.67e-7}),
                                            stats::box_summary(std::vector<double>{11.04e-7}));
    out.require(std::abs(cmp.ratio - 0.876) <= 1e-3, fmt::format("median ratio {:.4f} not 0.876", cmp.ratio));
    out.notes.push_back(fmt::format("{}/{} oracle vectors, partition {}/1000, median ratio {:.4f}", matched,
                                    test::kBoxOracles.size(), partition_ok, cmp.ratio));
    return out;
}

int run_cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
    std::ostringstream out;
    std::ostringstream err;
    const int rc = app::run(args, out, err);
    if (err_text) *err_text = err.str();
    return rc;
}

// Every regular file under `dir`, keyed by relative path.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files.emplace_back(fs::relative(e.path(), dir).generic_string(), dataio::read_text_file(e.path()));
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

Outcome end_to_end() {
    Outcome out;
    test::TempDir dir("acceptance_e2e");

    // synth power_series -> power against the truth sidecar.
    const auto raw = (dir / "series").string();
    const auto pw = (dir / "series_power").string();
    out.require(run_cli({"--out", raw, "synth", "power_series"}) == 0, "synth power_series failed");
    out.require(run_cli({"--out", pw, "power", raw}) == 0, "power failed");
    if (!out.pass) return out;
    const auto truth = report::read_report(dir / "series" / "truth.json").at("tls");
    const auto rep = report::read_report(dir / "series_power" / "power_report.json");
    const auto fit = report::tls_fit_from_json(rep.at("entries").at(0).at("tls_fit"));
    const double err = std::max({rel_err(fit.delta_tls, report::value_of(truth.at("delta_tls"))),
                                 rel_err(fit.delta_hp, report::value_of(truth.at("delta_hp"))),
                                 rel_err(fit.n_c, report::value_of(truth.at("n_c"))),
                                 rel_err(fit.beta, report::value_of(truth.at("beta")))});
    out.require(err <= 1e-6, fmt::format("power fit differs from truth by {:.3g}", err));
    out.require(fit.delta_lp - fit.delta_hp == fit.delta_tls, "identity not exact in the power report");

    // Full feedline pipeline, twice.
    const auto pipeline = [&](const fs::path& root) {
        const auto p = [&](const char* sub) { return (root / sub).string(); };
        std::string e;
        const std::vector<std::vector<std::string>> steps{
            {"--out", p("raw"), "synth", "feedline", "--process", "A/LP/LT/none", "--noise", "1e-4"},
            {"--out", p("scan"), "scan", p("raw/feedline_p11.txt")},
            {"--out", p("fit"), "--jobs", "4", "--windows", p("scan/windows.txt"), "fit", p("raw")},
            {"--out", p("power"), "--jobs", "4", "power", p("fit/segments")},
            {"--out", p("report"), "report", p("power")}};
        for (const auto& s : steps) {
            if (run_cli(s, &e) != 0) {
                std::string cmd;
                for (const auto& a : s) cmd += (cmd.empty() ? "" : " ") + a;
                out.require(false, fmt::format("'qloss {}' failed: {}", cmd, e));
                return false;
            }
        }
        return true;
    };
    // Reports record input paths, so both runs use the same directory.
    const auto t0 = std::chrono::steady_clock::now();
    const bool ok_a = pipeline(dir / "run");
    if (ok_a) fs::rename(dir / "run", dir / "a");
    const bool ok_b = ok_a && pipeline(dir / "run");
    if (ok_b) fs::rename(dir / "run", dir / "b");
    const double elapsed = seconds_since(t0);
    if (ok_a && ok_b) {
        const auto sa = snapshot(dir / "a");
        const auto sb = snapshot(dir / "b");
        out.require(sa == sb, "two pipeline runs produced different files");
        const auto summary = report::read_report(dir / "a" / "report" / "summary_report.json");
        const std::size_t n = summary.at("groups").at(0).at("n").get<std::size_t>();
        out.require(n == 9, fmt::format("summary groups {} resonators, expected 9", n));
        out.require(elapsed / 2.0 < 120.0, fmt::format("pipeline took {:.1f} s", elapsed / 2.0));
        out.notes.push_back(fmt::format("power fit within {:.2g} of truth; feedline pipeline {:.1f} s per run, {} files identical",
                                        err, elapsed / 2.0, sa.size()));
    }
    return out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"C1 circle-fit round trip", circle_fit_round_trip},
        {"C2 TLS-fit round trip", tls_fit_round_trip},
        {"C3 loss budget", loss_budget},
        {"C4 photon number", photon_number},
        {"C5 XRD peak fit and orientation", xrd},
        {"C6 RRR and Tc", rrr_tc},
        {"C7 box-plot statistics", statistics},
        {"C8 end-to-end pipeline", end_to_end},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.notes.push_back(fmt::format("threw: {}", e.what()));
        }
        std::string detail;
        for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
        if (!o.pass) ++failed;
    }
    return failed ? 1 : 0;
}
