#pragma once

// Synthetic measurement campaigns with known ground truth: a power series of
// one resonator and a multi-resonator feedline, both with internal loss that
// follows the TLS saturation model at every drive power.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qloss/circlefit.hpp"
#include "qloss/dataio.hpp"
#include "qloss/process.hpp"
#include "qloss/tlsloss.hpp"

namespace qloss::synth {

// Independent, reproducible sub-seed for stream `index`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Applied powers (dBm) whose self-consistent photon numbers are log-spaced
// over [n_lo, n_hi], ascending.
std::vector<double> power_grid(double fr, double qc_mag, double phi, const tlsloss::TlsParams& tls,
                               double attenuation_db, double n_lo = 1e-2, double n_hi = 1e6, std::size_t count = 12);

struct TruthPoint {
    std::string resonator_id;
    double applied_power_dbm = 0.0;
    double n_photon = 0.0;
    double qi = 0.0;
    double ql = 0.0;
};

struct PowerSeriesSpec {
    circlefit::NotchParams resonator{6e9, 0.0, 1e5, 0.0, 1.0, 0.0, 0.0};  // ql is derived per power
    tlsloss::TlsParams tls{2e-6, 10.0, 0.5, 1e-6};
    double attenuation_db = 70.0;
    std::vector<double> powers_dbm;  // empty: power_grid with 12 points
    std::size_t points = 1001;
    double span_linewidths = 10.0;
    double noise_sigma = 0.0;
    std::string resonator_id = "R1";
    std::string chip_id = "synthetic";
    std::optional<ProcessKey> process;
};

struct PowerSeries {
    std::vector<dataio::ComplexSweep> sweeps;  // ascending power
    std::vector<TruthPoint> truth;             // aligned with sweeps
};

PowerSeries synthesize_power_series(const PowerSeriesSpec& spec, std::uint64_t seed);

struct FeedlineResonator {
    std::string id;
    double fr = 0.0;
    double qc_mag = 5e5;
    double phi = 0.0;
    tlsloss::TlsParams tls{2e-6, 10.0, 0.5, 1e-6};
};

// Nine resonators 200 MHz apart from 5.6 GHz with the design coupling
// Q of 5e5; TLS amplitude and mismatch angle vary from resonator to
// resonator (reproducibly from `seed`).
std::vector<FeedlineResonator> default_feedline_resonators(std::uint64_t seed, std::size_t count = 9,
                                                           double f_first = 5.6e9, double spacing = 200e6);

struct FeedlineSpec {
    std::vector<FeedlineResonator> resonators;  // empty: default_feedline_resonators(seed)
    double a = 1.0;
    double alpha = 0.0;
    double tau = 0.0;
    double coarse_step_hz = 1e6;
    double margin_hz = 100e6;  // coarse grid extends this far past the outer resonances
    std::size_t cluster_points = 401;
    double cluster_linewidths = 10.0;
    double attenuation_db = 70.0;
    std::vector<double> powers_dbm;  // empty: 12-point grid for the middle resonator
    double noise_sigma = 0.0;
    std::string chip_id = "synthetic-chip";
    std::optional<ProcessKey> process;
};

struct Feedline {
    std::vector<dataio::ComplexSweep> sweeps;  // one wideband trace per power
    std::vector<FeedlineResonator> resonators;
    std::vector<TruthPoint> truth;  // per (power, resonator)
};

// Every resonator multiplies the background by its own notch response. The
// grid is a coarse comb plus a dense cluster around each resonance.
Feedline synthesize_feedline(const FeedlineSpec& spec, std::uint64_t seed);

}  // namespace qloss::synth
