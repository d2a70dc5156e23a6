#pragma once

// Notch-type resonator fitting in the complex plane.
//
// Model for the transmission past a side-coupled resonator:
//
//   S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi} / (1 + 2i Ql (f/fr - 1))]
//
// The fit removes the cable delay, fits a circle to the corrected trace,
// reads fr and Ql off the phase around the circle centre, normalises out the
// environment (a, alpha) via the off-resonant point, and then refines all
// seven parameters together.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qloss/dataio.hpp"

namespace qloss::circlefit {

struct NotchParams {
    double fr = 0.0;      // Hz
    double ql = 0.0;      // loaded Q
    double qc_mag = 0.0;  // |Qc|; +inf disables the resonance
    double phi = 0.0;     // rad, impedance-mismatch rotation
    double a = 1.0;       // background amplitude
    double alpha = 0.0;   // rad, background phase
    double tau = 0.0;     // s, cable delay
};

// Standard errors of the fitted quantities (same units as the values).
struct ResonanceSigma {
    double fr = 0.0;
    double ql = 0.0;
    double qc_mag = 0.0;
    double phi = 0.0;
    double qi = 0.0;
    double a = 0.0;
    double alpha = 0.0;
    double tau = 0.0;
};

struct ResonanceFit {
    double fr = 0.0;
    double ql = 0.0;
    double qc_mag = 0.0;
    double phi = 0.0;
    double qi = 0.0;  // from 1/Qi = 1/Ql - cos(phi)/|Qc|
    double a = 0.0;
    double alpha = 0.0;  // wrapped to (-pi, pi]
    double tau = 0.0;
    double rms_residual = 0.0;  // per quadrature, in S21 units
    ResonanceSigma sigma;
    int iterations = 0;
    std::vector<std::string> warnings;

    NotchParams params() const { return {fr, ql, qc_mag, phi, a, alpha, tau}; }
};

struct Circle {
    std::complex<double> center;
    double radius = 0.0;
};

// Internal quality factor with the cos(phi)/|Qc| (real part of 1/Qc)
// convention. Throws DomainError unless Ql, |Qc| > 0.
double internal_q(double ql, double qc_mag, double phi);

std::complex<double> notch_s21(const NotchParams& p, double f);

// Noise-free model plus complex Gaussian noise of `noise_sigma` per
// quadrature, drawn from a generator seeded with `seed`.
dataio::ComplexSweep synthesize_notch(const NotchParams& p, std::span<const double> frequencies, double noise_sigma,
                                      std::uint64_t seed, dataio::SweepMetadata meta = {});

// `points` evenly spaced frequencies covering `span_linewidths * fr/Ql`
// centred on fr.
std::vector<double> linewidth_grid(double fr, double ql, double span_linewidths = 10.0, std::size_t points = 1001);

// Algebraic (Taubin) circle fit. Throws DomainError for fewer than 3 points or
// collinear/coincident data.
Circle fit_circle(std::span<const std::complex<double>> points);

// Cable delay: straight-line fit to the unwrapped phase of the outer 20% of
// points on each side, refined by minimising the circle-fit residual of the
// delay-corrected trace, then by the joint notch-model fit when a resonance
// is visible. Throws FitError when the phase cannot be unwrapped.
double estimate_delay(const dataio::ComplexSweep& sweep);

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;
};

// Throws FitError when no resonance is visible above the noise, the final
// refinement does not converge, or the result is unphysical.
ResonanceFit fit_resonance(const dataio::ComplexSweep& sweep, const FitOptions& options = {});

}  // namespace qloss::circlefit
