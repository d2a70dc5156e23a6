#pragma once

// Film metrics: XRD peak shapes and orientation, sheet-resistance
// uniformity, resistivity, and Tc/RRR from a resistance-temperature sweep.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qloss/dataio.hpp"

namespace qloss::filmchar {

// ---- XRD -------------------------------------------------------------------

struct Window {
    double lo = 0.0;  // degrees 2theta
    double hi = 0.0;
};

const std::vector<Window>& default_windows();

struct PeakSigma {
    double center = 0.0;
    double fwhm = 0.0;
    double amplitude = 0.0;
    double eta = 0.0;
    double baseline_intercept = 0.0;
    double baseline_slope = 0.0;
};

struct PeakFit {
    double center = 0.0;     // degrees 2theta
    double fwhm = 0.0;       // degrees
    double amplitude = 0.0;  // counts above baseline at the centre
    double eta = 0.0;        // Lorentzian fraction
    double baseline_intercept = 0.0;  // counts at 2theta = 0
    double baseline_slope = 0.0;      // counts per degree
    PeakSigma sigma;
    Window window;
    double rms_residual = 0.0;
    int iterations = 0;
};

// Unit-height profiles with full width at half maximum `fwhm`.
double gaussian(double x, double center, double fwhm);
double lorentzian(double x, double center, double fwhm);
double pseudo_voigt(double x, double center, double fwhm, double amplitude, double eta);
// Profile plus linear baseline.
double peak_model(const PeakFit& p, double x);

// One pseudo-Voigt fit per window. Throws DomainError for a window with fewer
// than 15 points, NoPeakError when there is no peak (amplitude below 3x the
// noise, or a fitted fwhm under two sample steps) and FitError when the fit
// does not converge.
std::vector<PeakFit> fit_peaks(const dataio::XrdScan& scan, std::span<const Window> windows);
PeakFit fit_peak(const dataio::XrdScan& scan, const Window& window);

inline constexpr double kTiN111Deg = 36.6;
inline constexpr double kTiN200Deg = 42.6;
inline constexpr Window kBand111{36.0, 37.5};
inline constexpr Window kBand200{42.0, 43.5};

enum class Orientation { None, TiN111, TiN200, Mixed };
std::string to_string(Orientation o);

struct OrientationResult {
    Orientation orientation = Orientation::None;
    std::optional<double> shift_111;  // fitted minus literature position, degrees
    std::optional<double> shift_200;
};

// The strongest peak inside each band decides presence and shift.
OrientationResult classify_orientation(std::span<const PeakFit> peaks);

// Grain size of a relative to b from the Scherrer proportionality
// size ~ 1/(FWHM cos(theta)), theta = half the peak's 2theta.
double scherrer_ratio(const PeakFit& a, const PeakFit& b);

// ---- sheet resistance ------------------------------------------------------

struct WaferStats {
    std::string wafer_id;
    double mean = 0.0;
    double sigma_pct = 0.0;  // sample std / mean
};

struct SheetStats {
    std::size_t wafers = 0;
    double mean = 0.0;  // over every reading
    double max_wafer_sigma_pct = 0.0;
    double max_pointwise_sigma_pct = 0.0;  // worst site, across wafers
    std::vector<WaferStats> per_wafer;
};

// Throws DomainError for no maps or maps whose site labels differ.
SheetStats sheet_stats(std::span<const dataio::SheetMap> maps);

// rho in micro-ohm cm from ohm/sq and nm.
double resistivity(double r_square_ohm_sq, double thickness_nm);

// ---- Tc / RRR --------------------------------------------------------------

struct TcResult {
    double tc = 0.0;                // K, 50% of r_normal
    double transition_width = 0.0;  // K, 10%-90%
    double t_onset = 0.0;           // K, start of the normal-state plateau
    double r_normal = 0.0;          // ohm
    double r_300k = 0.0;            // ohm
    double rrr = 0.0;
    std::vector<std::string> warnings;  // e.g. rrr < 1
};

// Throws FitError when no transition is found and DomainError when the sweep
// does not reach 300 K (within 5 K).
TcResult extract_tc_rrr(const dataio::RtSweep& sweep);

// ---- generators ------------------------------------------------------------

struct PeakSpec {
    double center = 0.0;
    double fwhm = 0.0;
    double amplitude = 0.0;
    double eta = 0.0;
};

// Scan on an even grid with a linear background; Gaussian counting noise of
// `noise_sigma` when non-zero.
dataio::XrdScan synthesize_xrd(std::span<const PeakSpec> peaks, double two_theta_lo, double two_theta_hi,
                               double step_deg, double background_intercept, double background_slope,
                               double noise_sigma, std::uint64_t seed);

struct RtSpec {
    double tc = 4.7;             // K
    double width = 0.2;          // K, 10%-90%
    double r_normal = 25.0;      // ohm just above Tc
    double rrr = 4.0;
    double noise_sigma = 0.0;    // ohm
};

// Logistic transition on a flat residual plateau that rises quadratically
// from 20 K to rrr * r_normal at 300 K. Grid: 0.1-10 K every 5 mK, then to
// 300 K every 0.5 K.
dataio::RtSweep synthesize_rt(const RtSpec& spec, std::uint64_t seed);

}  // namespace qloss::filmchar
