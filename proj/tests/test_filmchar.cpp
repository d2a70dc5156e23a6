#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "qloss/dataio.hpp"
#include "qloss/error.hpp"
#include "qloss/filmchar.hpp"
#include "support.hpp"

using namespace qloss;
using namespace qloss::filmchar;
using test::rel_err;

namespace {

PeakFit peak_at(double center, double fwhm) {
    PeakFit p;
    p.center = center;
    p.fwhm = fwhm;
    p.amplitude = 100.0;
    return p;
}

dataio::XrdScan scan_of(std::vector<PeakSpec> peaks, double noise = 0.0, std::uint64_t seed = 1) {
    return synthesize_xrd(peaks, 30.0, 50.0, 0.01, 20.0, 0.1, noise, seed);
}

dataio::SheetMap wafer(const std::string& id, std::vector<double> r) {
    return {id, {"c", "n", "ne", "e", "se", "s", "sw", "w", "nw"}, std::move(r), "batch", "A"};
}

}  // namespace

TEST_CASE("profile shapes") {
    for (double x = 35.0; x <= 39.0; x += 0.013) {
        CHECK(std::abs(pseudo_voigt(x, 36.9, 0.4, 1.0, 0.0) - gaussian(x, 36.9, 0.4)) <= 1e-12);
        CHECK(std::abs(pseudo_voigt(x, 36.9, 0.4, 1.0, 1.0) - lorentzian(x, 36.9, 0.4)) <= 1e-12);
    }
    CHECK(gaussian(36.9, 36.9, 0.4) == 1.0);
    CHECK(lorentzian(36.9, 36.9, 0.4) == 1.0);
    CHECK(gaussian(37.1, 36.9, 0.4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lorentzian(36.7, 36.9, 0.4) == doctest::Approx(0.5).epsilon(1e-12));
    PeakFit p = peak_at(36.9, 0.4);
    p.amplitude = 750.0;
    p.eta = 0.3;
    p.baseline_intercept = 12.0;
    p.baseline_slope = 0.25;
    CHECK(peak_model(p, 36.9) == doctest::Approx(750.0 + 12.0 + 0.25 * 36.9).epsilon(1e-14));
}

TEST_CASE("noiseless peak recovery across eta") {
    for (double eta : {0.0, 0.3, 0.7, 1.0}) {
        CAPTURE(eta);
        const auto scan = scan_of({{36.9, 0.4, 800.0, eta}});
        const auto fit = fit_peak(scan, default_windows()[0]);
        CHECK(rel_err(fit.center, 36.9) < 1e-6);
        CHECK(rel_err(fit.fwhm, 0.4) < 1e-6);
        CHECK(rel_err(fit.amplitude, 800.0) < 1e-6);
        CHECK(std::abs(fit.eta - eta) < 1e-6);
        CHECK(fit.eta >= 0.0);
        CHECK(fit.eta <= 1.0);
        CHECK(fit.fwhm > 0.0);
        CHECK(rel_err(fit.baseline_intercept, 20.0) < 1e-5);
        CHECK(rel_err(fit.baseline_slope, 0.1) < 1e-5);
    }
}

TEST_CASE("gaussian peak at 36.9 degrees") {
    const auto fit = fit_peak(scan_of({{36.9, 0.4, 500.0, 0.0}}), {35.5, 38.5});
    CHECK(fit.center == doctest::Approx(36.9).epsilon(1e-6));
    CHECK(fit.fwhm == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(fit.eta < 0.05);
}

TEST_CASE("noisy peak stays close") {
    const auto fit = fit_peak(scan_of({{42.8, 0.9, 400.0, 0.5}}, 5.0, 3), default_windows()[1]);
    CHECK(std::abs(fit.center - 42.8) < 0.01);
    CHECK(rel_err(fit.fwhm, 0.9) < 0.05);
    CHECK(fit.sigma.center > 0.0);
}

TEST_CASE("fit_peaks error paths") {
    CHECK_THROWS_AS(fit_peak(scan_of({}), default_windows()[0]), NoPeakError);
    CHECK_THROWS_AS(fit_peak(scan_of({}, 3.0, 2), default_windows()[0]), NoPeakError);
    CHECK_THROWS_AS(fit_peaks(scan_of({{42.8, 0.4, 500.0, 0.5}}), default_windows()), NoPeakError);
    CHECK_THROWS_AS(fit_peak(scan_of({{36.9, 0.4, 500.0, 0.5}}), {36.8, 36.9}), DomainError);
    const auto two = scan_of({{36.9, 0.4, 500.0, 0.5}, {42.8, 0.8, 300.0, 0.5}});
    const auto fits = fit_peaks(two, default_windows());
    REQUIRE(fits.size() == 2);
    CHECK(fits[1].center == doctest::Approx(42.8).epsilon(1e-6));
}

TEST_CASE("a lone one-sample spike is not a peak") {
    const auto flat = scan_of({});
    const auto tt = flat.two_theta();
    std::vector<double> x(tt.begin(), tt.end());
    std::vector<double> y(flat.counts().begin(), flat.counts().end());
    y[static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), 36.9) - x.begin())] += 200.0;
    CHECK_THROWS_AS(fit_peak(dataio::XrdScan(x, y), default_windows()[0]), NoPeakError);
    // Pure noise leaves the window empty whatever the draw.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CHECK_THROWS_AS(fit_peak(scan_of({}, 2.0, seed), default_windows()[0]), NoPeakError);
    }
    // A faint but resolved peak (15 sigma, 40 samples wide) is still found.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto fit = fit_peak(scan_of({{36.9, 0.4, 30.0, 0.5}}, 2.0, seed), default_windows()[0]);
        CHECK(std::abs(fit.center - 36.9) < 0.05);
        CHECK(rel_err(fit.fwhm, 0.4) < 0.25);
    }
}

TEST_CASE("orientation classification") {
    const std::vector<PeakFit> only111{peak_at(36.9, 0.3)};
    const auto a = classify_orientation(only111);
    CHECK(a.orientation == Orientation::TiN111);
    REQUIRE(a.shift_111);
    CHECK(*a.shift_111 == doctest::Approx(0.3).epsilon(1e-9));
    CHECK_FALSE(a.shift_200);

    const std::vector<PeakFit> only200{peak_at(42.8, 0.8)};
    const auto b = classify_orientation(only200);
    CHECK(b.orientation == Orientation::TiN200);
    REQUIRE(b.shift_200);
    CHECK(*b.shift_200 == doctest::Approx(0.2).epsilon(1e-9));

    const std::vector<PeakFit> both{peak_at(36.9, 0.3), peak_at(42.8, 0.8)};
    CHECK(classify_orientation(both).orientation == Orientation::Mixed);

    const std::vector<PeakFit> outside{peak_at(39.0, 0.3)};
    CHECK(classify_orientation(outside).orientation == Orientation::None);
    CHECK(classify_orientation(std::vector<PeakFit>{}).orientation == Orientation::None);
    CHECK(to_string(Orientation::Mixed) == "mixed");
}

TEST_CASE("classification of fitted synthetic scans") {
    const auto fits = fit_peaks(scan_of({{36.9, 0.3, 900.0, 0.4}, {42.8, 1.2, 250.0, 0.6}}), default_windows());
    const auto o = classify_orientation(fits);
    CHECK(o.orientation == Orientation::Mixed);
    CHECK(*o.shift_111 == doctest::Approx(0.3).epsilon(1e-5));
    CHECK(*o.shift_200 == doctest::Approx(0.2).epsilon(1e-5));
}

TEST_CASE("Scherrer ratio") {
    const auto a = peak_at(36.9, 0.25);
    const auto b = peak_at(42.8, 1.0);
    // 4 cos(21.4 deg) / cos(18.45 deg)
    CHECK(std::abs(scherrer_ratio(a, b) - 3.926) < 1e-3);
    CHECK(scherrer_ratio(a, a) == 1.0);
    CHECK(scherrer_ratio(a, b) * scherrer_ratio(b, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(scherrer_ratio(b, a) == doctest::Approx(1.0 / scherrer_ratio(a, b)).epsilon(1e-15));
}

TEST_CASE("sheet statistics on constant maps") {
    std::vector<dataio::SheetMap> maps;
    for (int w = 0; w < 4; ++w) maps.push_back(wafer("W" + std::to_string(w), std::vector<double>(9, 4.7)));
    const auto st = sheet_stats(maps);
    CHECK(st.wafers == 4);
    CHECK(st.mean == doctest::Approx(4.7).epsilon(1e-15));
    CHECK(st.max_wafer_sigma_pct == 0.0);
    CHECK(st.max_pointwise_sigma_pct == 0.0);
}

TEST_CASE("per-wafer sigma uses the sample standard deviation") {
    // mean 11, squared deviations 8 * 1 + 64 = 72, std sqrt(72 / 8) = 3
    const std::vector<dataio::SheetMap> maps{wafer("W1", {10, 10, 10, 10, 10, 10, 10, 10, 19})};
    const auto st = sheet_stats(maps);
    CHECK(st.per_wafer.at(0).mean == doctest::Approx(11.0));
    CHECK(st.max_wafer_sigma_pct == doctest::Approx(300.0 / 11.0).epsilon(1e-12));
    CHECK(st.max_pointwise_sigma_pct == 0.0);
}

TEST_CASE("maps built to match deposition A statistics") {
    // Each wafer follows a linear profile with 19.0% spread; wafers are scaled
    // copies whose factors spread by 9.7%, so every site sees 9.7%.
    const double profile_std = std::sqrt(7.5);  // sample std of -4..4
    const double q = std::sqrt(0.75);           // {-q, -q, q, q} has sample std 1
    const double factors[4] = {-q, -q, q, q};
    std::vector<dataio::SheetMap> maps;
    for (int w = 0; w < 4; ++w) {
        std::vector<double> r;
        const double c = 1.0 + 0.097 * factors[w];
        for (int k = -4; k <= 4; ++k) r.push_back(11.9 * c * (1.0 + 0.19 * k / profile_std));
        maps.push_back(wafer("A" + std::to_string(w), r));
    }
    const auto st = sheet_stats(maps);
    CHECK(st.mean == doctest::Approx(11.9).epsilon(1e-12));
    CHECK(std::round(st.max_wafer_sigma_pct * 10.0) / 10.0 == doctest::Approx(19.0));
    CHECK(std::round(st.max_pointwise_sigma_pct * 10.0) / 10.0 == doctest::Approx(9.7));
}

TEST_CASE("sheet statistics are permutation invariant") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(4.35, 0.15);
    std::vector<dataio::SheetMap> maps;
    for (int w = 0; w < 4; ++w) {
        std::vector<double> r;
        for (int k = 0; k < 9; ++k) r.push_back(n(rng));
        maps.push_back(wafer("B" + std::to_string(w), r));
    }
    const auto ref = sheet_stats(maps);
    std::sort(maps.begin(), maps.end(), [](const auto& a, const auto& b) { return a.wafer_id < b.wafer_id; });
    int perms = 0;
    do {
        const auto st = sheet_stats(maps);
        CHECK(st.mean == doctest::Approx(ref.mean).epsilon(1e-14));
        CHECK(st.max_wafer_sigma_pct == doctest::Approx(ref.max_wafer_sigma_pct).epsilon(1e-14));
        CHECK(st.max_pointwise_sigma_pct == doctest::Approx(ref.max_pointwise_sigma_pct).epsilon(1e-14));
        ++perms;
    } while (std::next_permutation(maps.begin(), maps.end(),
                                   [](const auto& a, const auto& b) { return a.wafer_id < b.wafer_id; }));
    CHECK(perms == 24);
}

TEST_CASE("sheet statistics input errors") {
    CHECK_THROWS_AS(sheet_stats(std::vector<dataio::SheetMap>{}), DomainError);
    auto a = wafer("W1", std::vector<double>(9, 4.0));
    auto b = wafer("W2", std::vector<double>(9, 4.0));
    b.sites[3] = "x";
    CHECK_THROWS_AS(sheet_stats(std::vector<dataio::SheetMap>{a, b}), DomainError);
}

TEST_CASE("resistivity unit conversion") {
    CHECK(resistivity(4.7, 150.0) == doctest::Approx(70.5).epsilon(1e-14));
    CHECK(resistivity(11.9, 150.0) == doctest::Approx(178.5).epsilon(1e-14));
    CHECK(resistivity(1.0, 1e7) == doctest::Approx(1e6).epsilon(1e-14));
}

TEST_CASE("rrr for a 25 ohm plateau and 100 ohm at room temperature") {
    std::vector<double> t;
    std::vector<double> r;
    for (double x = 1.0; x <= 300.0; x += 0.5) {
        t.push_back(x);
        if (x < 4.5) {
            r.push_back(0.0);
        } else if (x < 5.0) {
            r.push_back(12.5);
        } else if (x <= 20.0) {
            r.push_back(25.0);
        } else {
            r.push_back(25.0 + 75.0 * (x - 20.0) / 280.0);
        }
    }
    const auto res = extract_tc_rrr(dataio::RtSweep(t, r));
    CHECK(res.r_normal == 25.0);
    CHECK(res.r_300k == 100.0);
    CHECK(res.rrr == 4.0);
}

TEST_CASE("logistic transitions recover tc") {
    for (double tc = 4.2; tc <= 5.2001; tc += 0.1) {
        CAPTURE(tc);
        RtSpec spec;
        spec.tc = tc;
        const auto res = extract_tc_rrr(synthesize_rt(spec, 3));
        CHECK(std::abs(res.tc - tc) < 0.01);
        CHECK(res.transition_width == doctest::Approx(spec.width).epsilon(0.05));
        CHECK(rel_err(res.rrr, spec.rrr) < 0.01);
        CHECK(res.t_onset > tc);
        CHECK(res.warnings.empty());
    }
}

TEST_CASE("noisy transition") {
    RtSpec spec;
    spec.noise_sigma = 0.05;
    const auto res = extract_tc_rrr(synthesize_rt(spec, 17));
    CHECK(std::abs(res.tc - spec.tc) < 0.02);
}

TEST_CASE("tc, width and rrr are invariant under resistance scaling") {
    const auto sweep = synthesize_rt({4.6, 0.3, 20.0, 3.0, 0.0}, 1);
    const auto base = extract_tc_rrr(sweep);
    for (double c : {0.01, 3.0, 1e4}) {
        std::vector<double> r(sweep.resistance().begin(), sweep.resistance().end());
        for (auto& v : r) v *= c;
        const auto scaled = extract_tc_rrr(dataio::RtSweep(std::vector<double>(sweep.temperature().begin(),
                                                                               sweep.temperature().end()),
                                                           r));
        CHECK(scaled.tc == doctest::Approx(base.tc).epsilon(1e-12));
        CHECK(scaled.transition_width == doctest::Approx(base.transition_width).epsilon(1e-10));
        CHECK(scaled.rrr == doctest::Approx(base.rrr).epsilon(1e-12));
        CHECK(scaled.r_normal == doctest::Approx(c * base.r_normal).epsilon(1e-12));
    }
}

TEST_CASE("tc/rrr error paths") {
    std::vector<double> t;
    std::vector<double> r;
    for (double x = 1.0; x <= 300.0; x += 1.0) {
        t.push_back(x);
        r.push_back(20.0 + 0.2 * x);
    }
    CHECK_THROWS_AS(extract_tc_rrr(dataio::RtSweep(t, r)), FitError);

    const auto full = synthesize_rt({}, 1);
    std::vector<double> tt;
    std::vector<double> rr;
    for (std::size_t i = 0; i < full.size() && full.temperature()[i] <= 250.0; ++i) {
        tt.push_back(full.temperature()[i]);
        rr.push_back(full.resistance()[i]);
    }
    CHECK_THROWS_AS(extract_tc_rrr(dataio::RtSweep(tt, rr)), DomainError);
}

TEST_CASE("rrr below one is flagged") {
    const auto res = extract_tc_rrr(synthesize_rt({4.7, 0.2, 25.0, 0.8, 0.0}, 1));
    // The 95% onset rule leaves ~0.25% of the logistic tail in the plateau
    // window for a 0.2 K wide transition.
    CHECK(res.rrr == doctest::Approx(0.8).epsilon(5e-3));
    CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("bundled R(T) sample lies in the expected Tc range") {
    const auto sweep = dataio::parse_rt_file(std::string(QLOSS_DATA_DIR) + "/rt_film_a.txt");
    const auto res = extract_tc_rrr(sweep);
    CHECK(res.tc >= 4.2);
    CHECK(res.tc <= 5.2);
    CHECK(res.rrr > 1.0);
}

TEST_CASE("bundled XRD sample classifies as (111)") {
    const auto scan = dataio::parse_xrd_file(std::string(QLOSS_DATA_DIR) + "/xrd_film_a.txt");
    const auto fits = fit_peaks(scan, std::vector<Window>{default_windows()[0]});
    const auto o = classify_orientation(fits);
    CHECK(o.orientation == Orientation::TiN111);
    CHECK(std::abs(*o.shift_111 - 0.3) < 0.02);
}
