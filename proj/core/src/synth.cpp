#include "qloss/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "qloss/error.hpp"

namespace qloss::synth {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finaliser over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

double ql_from_qi(double qi, double qc_mag, double phi) { return 1.0 / (1.0 / qi + std::cos(phi) / qc_mag); }

void check_resonator(double fr, double qc_mag, double phi) {
    if (!(fr > 0.0) || !(qc_mag > 0.0)) throw DomainError("resonator needs positive fr and |Qc|");
    if (!(std::abs(phi) < 1.5)) throw DomainError("mismatch angle must satisfy |phi| < 1.5 rad");
}

}  // namespace

std::vector<double> power_grid(double fr, double qc_mag, double phi, const tlsloss::TlsParams& tls,
                               double attenuation_db, double n_lo, double n_hi, std::size_t count) {
    check_resonator(fr, qc_mag, phi);
    if (!(n_lo > 0.0) || !(n_hi > n_lo) || count < 2) throw DomainError("power grid needs 0 < n_lo < n_hi, count >= 2");
    const double wr = 2.0 * std::numbers::pi * fr;
    std::vector<double> out;
    for (std::size_t k = 0; k < count; ++k) {
        const double n = n_lo * std::pow(n_hi / n_lo, static_cast<double>(k) / static_cast<double>(count - 1));
        const double qi = 1.0 / tlsloss::eval_tls_model(n, tls);
        const double ql = ql_from_qi(qi, qc_mag, phi);
        // Invert <n> = 2/(hbar wr^2) Ql^2/Qc P for the chip power.
        const double p_chip = n * tlsloss::kHbar * wr * wr * qc_mag / (2.0 * ql * ql);
        out.push_back(10.0 * std::log10(p_chip) + 30.0 + attenuation_db);
    }
    return out;
}

PowerSeries synthesize_power_series(const PowerSeriesSpec& spec, std::uint64_t seed) {
    const auto& r = spec.resonator;
    check_resonator(r.fr, r.qc_mag, r.phi);
    if (spec.points < dataio::ComplexSweep::kMinPoints) throw DomainError("power series needs at least 32 points");
    std::vector<double> powers = spec.powers_dbm;
    if (powers.empty()) powers = power_grid(r.fr, r.qc_mag, r.phi, spec.tls, spec.attenuation_db);
    std::sort(powers.begin(), powers.end());

    PowerSeries out;
    for (std::size_t k = 0; k < powers.size(); ++k) {
        const double p_chip = tlsloss::chip_power_w(powers[k], spec.attenuation_db);
        const auto op = tlsloss::self_consistent_point(spec.tls, r.fr, r.qc_mag, r.phi, p_chip);
        circlefit::NotchParams p = r;
        p.ql = op.ql;

        dataio::SweepMetadata meta;
        meta.applied_power_dbm = powers[k];
        meta.line_attenuation_db = spec.attenuation_db;
        meta.temperature_k = 0.01;
        meta.resonator_id = spec.resonator_id;
        meta.chip_id = spec.chip_id;
        meta.process = spec.process;
        const auto grid = circlefit::linewidth_grid(r.fr, op.ql, spec.span_linewidths, spec.points);
        out.sweeps.push_back(
            circlefit::synthesize_notch(p, grid, spec.noise_sigma, derive_seed(seed, k), std::move(meta)));
        out.truth.push_back({spec.resonator_id, powers[k], op.n_photon, op.qi, op.ql});
    }
    return out;
}

std::vector<FeedlineResonator> default_feedline_resonators(std::uint64_t seed, std::size_t count, double f_first,
                                                           double spacing) {
    std::mt19937_64 rng(derive_seed(seed, 0xFEEDull));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<FeedlineResonator> out;
    for (std::size_t k = 0; k < count; ++k) {
        FeedlineResonator res;
        res.id = fmt::format("R{}", k + 1);
        res.fr = f_first + spacing * static_cast<double>(k);
        res.qc_mag = 5e5;
        res.phi = 0.05 * normal(rng);
        res.tls.delta_tls = 2e-6 * std::exp(0.2 * normal(rng));
        res.tls.n_c = 10.0;
        res.tls.beta = 0.5;
        res.tls.delta_hp = 1e-6;
        out.push_back(res);
    }
    return out;
}

Feedline synthesize_feedline(const FeedlineSpec& spec, std::uint64_t seed) {
    Feedline out;
    out.resonators = spec.resonators.empty() ? default_feedline_resonators(seed) : spec.resonators;
    auto& res = out.resonators;
    if (res.empty()) throw DomainError("feedline needs at least one resonator");
    std::sort(res.begin(), res.end(), [](const auto& a, const auto& b) { return a.fr < b.fr; });
    for (const auto& r : res) check_resonator(r.fr, r.qc_mag, r.phi);
    if (!(spec.coarse_step_hz > 0.0) || spec.cluster_points < 2) throw DomainError("feedline grid parameters invalid");

    // Frequency grid shared by every power: coarse comb plus a cluster wide
    // enough for the broadest (lowest-power) linewidth of each resonator.
    std::vector<double> f;
    const double f_lo = res.front().fr - spec.margin_hz;
    const double f_hi = res.back().fr + spec.margin_hz;
    const auto n_coarse = static_cast<std::size_t>(std::floor((f_hi - f_lo) / spec.coarse_step_hz)) + 1;
    for (std::size_t i = 0; i < n_coarse; ++i) f.push_back(f_lo + spec.coarse_step_hz * static_cast<double>(i));
    for (const auto& r : res) {
        const double ql_min = ql_from_qi(1.0 / (r.tls.delta_tls + r.tls.delta_hp), r.qc_mag, r.phi);
        const auto cluster = circlefit::linewidth_grid(r.fr, ql_min, spec.cluster_linewidths, spec.cluster_points);
        f.insert(f.end(), cluster.begin(), cluster.end());
    }
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end(), [](double a, double b) { return b - a < 1e-3; }), f.end());

    std::vector<double> powers = spec.powers_dbm;
    if (powers.empty()) {
        const auto& mid = res[res.size() / 2];
        powers = power_grid(mid.fr, mid.qc_mag, mid.phi, mid.tls, spec.attenuation_db);
    }
    std::sort(powers.begin(), powers.end());

    for (std::size_t k = 0; k < powers.size(); ++k) {
        const double p_chip = tlsloss::chip_power_w(powers[k], spec.attenuation_db);
        std::vector<circlefit::NotchParams> notches;
        for (const auto& r : res) {
            const auto op = tlsloss::self_consistent_point(r.tls, r.fr, r.qc_mag, r.phi, p_chip);
            notches.push_back({r.fr, op.ql, r.qc_mag, r.phi, 1.0, 0.0, 0.0});
            out.truth.push_back({r.id, powers[k], op.n_photon, op.qi, op.ql});
        }

        std::mt19937_64 rng(derive_seed(seed, k));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<std::complex<double>> s21;
        s21.reserve(f.size());
        const circlefit::NotchParams background{1.0, 1.0, std::numeric_limits<double>::infinity(), 0.0,
                                                spec.a, spec.alpha, spec.tau};
        for (double fi : f) {
            std::complex<double> s = circlefit::notch_s21(background, fi);
            for (const auto& n : notches) s *= circlefit::notch_s21(n, fi);
            if (spec.noise_sigma > 0.0) {
                const double re = normal(rng);
                const double im = normal(rng);
                s += spec.noise_sigma * std::complex<double>(re, im);
            }
            s21.push_back(s);
        }
        dataio::SweepMetadata meta;
        meta.applied_power_dbm = powers[k];
        meta.line_attenuation_db = spec.attenuation_db;
        meta.temperature_k = 0.01;
        meta.resonator_id = "feedline";
        meta.chip_id = spec.chip_id;
        meta.process = spec.process;
        out.sweeps.emplace_back(f, std::move(s21), std::move(meta));
    }
    return out;
}

}  // namespace qloss::synth
