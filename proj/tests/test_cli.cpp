#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "app/app.hpp"
#include "qloss/dataio.hpp"
#include "qloss/report.hpp"
#include "support.hpp"

using namespace qloss;
using report::Json;
using report::value_of;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int rc = 0;
    std::string out;
    std::string err;
};

RunResult qloss_run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int rc = app::run(args, out, err);
    return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return dataio::read_text_file(p); }

}  // namespace

TEST_CASE("scan finds every feedline dip within a linewidth") {
    test::TempDir dir("cli_scan");
    const auto raw = (dir / "raw").string();
    REQUIRE(qloss_run({"--out", raw, "synth", "feedline"}).rc == 0);
    const auto truth = report::read_report(dir / "raw" / "truth.json");
    const auto sweep_file = dir / "raw" / "feedline_p06.txt";
    const double power = dataio::parse_sweep_file(sweep_file).meta().applied_power_dbm;

    const auto res = qloss_run({"--out", (dir / "scan").string(), "scan", sweep_file.string()});
    REQUIRE(res.rc == 0);
    const auto rep = report::read_report(dir / "scan" / "scan_report.json");
    const auto& cands = rep.at("candidates");
    REQUIRE(cands.size() == truth.at("resonators").size());
    CHECK(cands.size() == 9);
    CHECK(fs::exists(dir / "scan" / "windows.txt"));

    for (const auto& r : truth.at("resonators")) {
        const std::string id = r.at("resonator_id");
        const double fr = value_of(r.at("fr"));
        double ql = 0.0;
        for (const auto& p : truth.at("points")) {
            if (p.at("resonator_id") == id && value_of(p.at("applied_power")) == power) ql = value_of(p.at("ql"));
        }
        REQUIRE(ql > 0.0);
        double best = INFINITY;
        for (const auto& c : cands) best = std::min(best, std::abs(value_of(c.at("frequency")) - fr));
        CAPTURE(id);
        CHECK(best <= fr / ql);
    }
    for (const auto& c : cands) CHECK_FALSE(c.at("proximity_flag").get<bool>());
}

TEST_CASE("scan of a flat trace reports no dips") {
    test::TempDir dir("cli_flat");
    std::vector<double> f;
    std::vector<std::complex<double>> s;
    for (int i = 0; i < 2001; ++i) {
        f.push_back(5e9 + 1e6 * i);
        s.emplace_back(0.5, 0.0);
    }
    dataio::SweepMetadata meta;
    meta.applied_power_dbm = -20;
    meta.line_attenuation_db = 70;
    meta.resonator_id = "feedline";
    meta.chip_id = "flat";
    dataio::write_sweep_file(dataio::ComplexSweep(f, s, meta), dir / "flat.txt");
    const auto res = qloss_run({"--out", (dir / "o").string(), "scan", (dir / "flat.txt").string()});
    CHECK(res.rc == 1);
    CHECK(res.err.find("no dips") != std::string::npos);
}

TEST_CASE("scan flags resonances closer than the spacing threshold") {
    test::TempDir dir("cli_pair");
    REQUIRE(qloss_run({"--out", (dir / "raw").string(), "synth", "feedline", "--frequencies", "6.0e9,6.03e9"}).rc == 0);
    const auto res = qloss_run({"--out", (dir / "scan").string(), "scan", (dir / "raw" / "feedline_p06.txt").string()});
    REQUIRE(res.rc == 0);
    const auto cands = report::read_report(dir / "scan" / "scan_report.json").at("candidates");
    REQUIRE(cands.size() == 2);
    CHECK(std::abs(value_of(cands[0].at("frequency")) - 6.0e9) < 1e6);
    CHECK(std::abs(value_of(cands[1].at("frequency")) - 6.03e9) < 1e6);
    CHECK(cands[0].at("proximity_flag").get<bool>());
    CHECK(cands[1].at("proximity_flag").get<bool>());
}

TEST_CASE("budget forward evaluation interpolates the table") {
    test::TempDir dir("cli_budget");
    dataio::write_text_file(dir / "losses.txt", "delta_sa delta_ma delta_ms delta_si\n1e-3 2e-3 3e-3 1e-7\n");
    const auto res = qloss_run({"--out", (dir / "o").string(), "--trench-nm", "25", "budget", "--losses",
                                (dir / "losses.txt").string()});
    REQUIRE(res.rc == 0);
    // Halfway between the 0 nm and 50 nm rows.
    const double p_sa = (2.83e-4 + 2.67e-4) / 2;
    const double p_ma = (4.95e-5 + 2.08e-5) / 2;
    const double p_ms = (5.93e-4 + 5.45e-4) / 2;
    const double p_si = (0.907 + 0.905) / 2;
    const double want = 1e-3 * p_sa + 2e-3 * p_ma + 3e-3 * p_ms + 1e-7 * p_si;
    const auto rep = report::read_report(dir / "o" / "budget_report.json");
    CHECK(rep.at("mode") == "forward");
    CHECK(test::rel_err(value_of(rep.at("delta_tls")), want) < 1e-12);

    const auto inline_delta = qloss_run({"--out", (dir / "o2").string(), "--trench-nm", "25", "budget", "--delta",
                                         "1e-3,2e-3,3e-3,1e-7"});
    REQUIRE(inline_delta.rc == 0);
    CHECK(value_of(report::read_report(dir / "o2" / "budget_report.json").at("delta_tls")) ==
          value_of(rep.at("delta_tls")));

    CHECK(qloss_run({"--out", (dir / "o3").string(), "budget", "--losses", (dir / "losses.txt").string()}).rc == 1);
    CHECK(qloss_run({"--out", (dir / "o3").string(), "--trench-nm", "250", "budget", "--losses",
                     (dir / "losses.txt").string()})
              .rc == 1);
}

TEST_CASE("budget decomposition from observations") {
    test::TempDir dir("cli_decompose");
    // delta = p . (1e-3, 2e-3, 3e-3, 1e-7) for four distinct geometries.
    std::string text = "p_sa p_ma p_ms p_si delta_tls\n";
    const double rows[4][4] = {{6e-4, 1e-5, 2e-4, 0.80}, {1e-4, 8e-5, 3e-4, 0.85}, {2e-4, 2e-5, 9e-4, 0.90},
                               {3e-4, 4e-5, 4e-4, 0.30}};
    for (const auto& r : rows) {
        const double d = 1e-3 * r[0] + 2e-3 * r[1] + 3e-3 * r[2] + 1e-7 * r[3];
        text += fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n", r[0], r[1], r[2], r[3], d);
    }
    dataio::write_text_file(dir / "obs.txt", text);
    const auto res = qloss_run({"--out", (dir / "o").string(), "budget", "--observations", (dir / "obs.txt").string()});
    REQUIRE(res.rc == 0);
    const auto d = report::read_report(dir / "o" / "budget_report.json").at("decomposition");
    CHECK(d.at("rank") == 4);
    CHECK(test::rel_err(value_of(d.at("losses").at("delta_ms")), 3e-3) < 1e-8);
    CHECK(test::rel_err(value_of(d.at("losses").at("delta_si")), 1e-7) < 1e-8);
}

TEST_CASE("power over a twelve-file series") {
    test::TempDir dir("cli_power");
    REQUIRE(qloss_run({"--out", (dir / "raw").string(), "synth", "power_series"}).rc == 0);
    const auto res = qloss_run({"--out", (dir / "p").string(), "--jobs", "2", "power", (dir / "raw").string()});
    REQUIRE(res.rc == 0);
    const auto rep = report::read_report(dir / "p" / "power_report.json");
    REQUIRE(rep.at("entries").size() == 1);
    const auto& e = rep.at("entries")[0];
    CHECK(e.at("points").size() == 12);
    CHECK(e.at("sources").size() == 12);
    CHECK(rep.at("diagnostics").empty());
    const auto curve = dataio::parse_column_file(dir / "p" / e.at("plot_files")[1].get<std::string>());
    CHECK(curve.rows.size() == 200);
    const auto loss = dataio::parse_column_file(dir / "p" / e.at("plot_files")[0].get<std::string>());
    CHECK(loss.rows.size() == 12);

    const auto truth = report::read_report(dir / "raw" / "truth.json");
    const auto& fit = e.at("tls_fit");
    CHECK(test::rel_err(value_of(fit.at("delta_tls")), value_of(truth.at("tls").at("delta_tls"))) < 1e-6);
    CHECK(test::rel_err(value_of(fit.at("delta_hp")), value_of(truth.at("tls").at("delta_hp"))) < 1e-6);
}

TEST_CASE("a corrupted file in a batch gives a partial exit") {
    test::TempDir dir("cli_partial");
    REQUIRE(qloss_run({"--out", (dir / "raw").string(), "synth", "power_series"}).rc == 0);
    auto text = slurp(dir / "raw" / "R1_p03.txt");
    text.resize(text.size() / 3);
    text += "garbage here\n";
    dataio::write_text_file(dir / "raw" / "R1_p03.txt", text);
    const auto res = qloss_run({"--out", (dir / "p").string(), "power", (dir / "raw").string()});
    CHECK(res.rc == 2);
    const auto rep = report::read_report(dir / "p" / "power_report.json");
    CHECK(rep.at("entries").size() == 1);
    CHECK(rep.at("entries")[0].at("points").size() == 11);
    REQUIRE(rep.at("diagnostics").size() == 1);
    CHECK(res.err.find("R1_p03.txt") != std::string::npos);
}

TEST_CASE("report groups resonators by process variation") {
    test::TempDir dir("cli_report");
    REQUIRE(qloss_run({"--out", (dir / "a").string(), "synth", "power_series", "--process", "A/LP/LT/none",
                       "--resonator-id", "R1", "--delta-tls", "9.67e-7", "--delta-hp", "1e-8"})
                .rc == 0);
    REQUIRE(qloss_run({"--out", (dir / "c").string(), "--seed", "7", "synth", "power_series", "--process",
                       "C/LP/HT/BOE_tc", "--resonator-id", "R2", "--delta-tls", "1.104e-6", "--delta-hp", "1e-8"})
                .rc == 0);
    REQUIRE(qloss_run({"--out", (dir / "pa").string(), "power", (dir / "a").string()}).rc == 0);
    REQUIRE(qloss_run({"--out", (dir / "pc").string(), "power", (dir / "c").string()}).rc == 0);
    const auto res =
        qloss_run({"--out", (dir / "s").string(), "report", (dir / "pa").string(), (dir / "pc").string()});
    REQUIRE(res.rc == 0);
    const auto rep = report::read_report(dir / "s" / "summary_report.json");
    REQUIRE(rep.at("groups").size() == 2);
    const auto& ga = rep.at("groups")[0];
    CHECK(ga.at("process") == "A/LP/LT/none");
    CHECK(ga.at("known_variation").get<bool>());
    CHECK(ga.at("tabulated_resonators") == 17);
    CHECK(test::rel_err(ga.at("delta_tls").at("median").get<double>(), 9.67e-7) < 1e-6);
    const auto& gc = rep.at("groups")[1];
    CHECK_FALSE(gc.at("known_variation").get<bool>());
    CHECK(rep.at("warnings").size() == 1);
    CHECK(rep.at("marginals").at("depo").contains("A"));
    CHECK(rep.at("marginals").at("depo").contains("C"));
}

TEST_CASE("synthetic r(t) gives back its tc") {
    test::TempDir dir("cli_rt");
    REQUIRE(qloss_run({"--out", (dir / "raw").string(), "synth", "rt"}).rc == 0);
    const auto res = qloss_run({"--out", (dir / "o").string(), "rrr", (dir / "raw" / "rt.txt").string()});
    REQUIRE(res.rc == 0);
    const auto e = report::read_report(dir / "o" / "rrr_report.json").at("entries").at(0).at("result");
    CHECK(std::abs(value_of(e.at("tc")) - 4.7) < 0.01);
    CHECK(std::abs(value_of(e.at("rrr")) - 4.0) < 0.04);
}

TEST_CASE("xrd classifies single- and mixed-orientation scans") {
    test::TempDir dir("cli_xrd");
    REQUIRE(qloss_run({"--out", (dir / "s200").string(), "synth", "xrd", "--center", "42.8", "--noise", "2"}).rc == 0);
    REQUIRE(qloss_run({"--out", (dir / "mix").string(), "synth", "xrd", "--center", "36.9,42.8", "--fwhm", "0.3,1.2",
                       "--amplitude", "900,250", "--eta", "0.4,0.6", "--noise", "2"})
                .rc == 0);
    const auto res = qloss_run({"--out", (dir / "o").string(), "xrd", (dir / "s200" / "xrd.txt").string(),
                                (dir / "mix" / "xrd.txt").string()});
    REQUIRE(res.rc == 0);
    const auto entries = report::read_report(dir / "o" / "xrd_report.json").at("entries");
    REQUIRE(entries.size() == 2);
    // Sorted input order: mix/ before s200/.
    CHECK(entries[0].at("orientation").at("orientation") == "mixed");
    CHECK(entries[1].at("orientation").at("orientation") == "200");
    CHECK(entries[1].at("peaks").size() == 1);
    CHECK(entries[1].at("empty_windows").size() == 1);
    // Grain size relative to the first scan: 1.2 vs 0.4 deg fwhm at the same centre.
    CHECK(value_of(entries[1].at("grain_size_ratio_vs_reference").at("200")) == doctest::Approx(3.0).epsilon(0.05));

    REQUIRE(qloss_run({"--out", (dir / "f").string(), "synth", "xrd", "--amplitude", "0", "--noise", "2"}).rc == 0);
    CHECK(qloss_run({"--out", (dir / "o2").string(), "xrd", (dir / "f" / "xrd.txt").string()}).rc == 1);
}

TEST_CASE("same seed, same bytes") {
    test::TempDir dir("cli_seed");
    const auto synth = [&](const std::string& sub, const std::string& seed) {
        return qloss_run({"--out", (dir / sub).string(), "--seed", seed, "synth", "notch", "--noise", "1e-3"}).rc;
    };
    REQUIRE(synth("a", "5") == 0);
    REQUIRE(synth("b", "5") == 0);
    REQUIRE(synth("c", "6") == 0);
    CHECK(slurp(dir / "a" / "notch.txt") == slurp(dir / "b" / "notch.txt"));
    CHECK(slurp(dir / "a" / "notch.txt") != slurp(dir / "c" / "notch.txt"));
    CHECK(slurp(dir / "a" / "truth.json") == slurp(dir / "b" / "truth.json"));
}

TEST_CASE("argument errors") {
    CHECK(qloss_run({}).rc != 0);
    CHECK(qloss_run({"frobnicate"}).rc != 0);
    CHECK(qloss_run({"scan", "/nonexistent/file.txt"}).rc != 0);
    CHECK(qloss_run({"--help"}).rc == 0);
    test::TempDir dir("cli_args");
    const auto res = qloss_run({"--out", dir.path().string(), "synth", "nonsense"});
    CHECK(res.rc != 0);
    CHECK(res.err.find("nonsense") != std::string::npos);
}
