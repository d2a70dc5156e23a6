#pragma once

// Power dependence of the internal loss.
//
//   delta(<n>) = delta_tls / (1 + <n>/n_c)^beta + delta_hp
//
// delta_lp is the <n> -> 0 limit (delta_tls + delta_hp), delta_hp the
// saturated high-power limit, so delta_tls = delta_lp - delta_hp always.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qloss/circlefit.hpp"
#include "qloss/dataio.hpp"

namespace qloss::tlsloss {

inline constexpr double kHbar = 1.054571817e-34;  // J s
inline constexpr double kBetaMin = 0.1;
inline constexpr double kBetaMax = 1.0;

struct LossPoint {
    double n_photon = 0.0;
    double delta = 0.0;  // 1/Qi
    double sigma_delta = 0.0;
    double applied_power_dbm = 0.0;
    std::string source;
};

struct TlsSigma {
    double delta_tls = 0.0;
    double delta_hp = 0.0;
    double delta_lp = 0.0;
    double n_c = 0.0;
    double beta = 0.0;
};

struct TlsFit {
    double delta_tls = 0.0;
    double delta_hp = 0.0;
    double delta_lp = 0.0;  // delta_tls + delta_hp, stored
    double n_c = 0.0;
    double beta = 0.0;
    bool beta_at_bound = false;
    TlsSigma sigma;
    double rms_residual = 0.0;  // rms of weighted log-residuals
    int iterations = 0;
    std::size_t points = 0;
    std::vector<std::string> warnings;
};

struct TlsParams {
    double delta_tls = 0.0;
    double n_c = 0.0;
    double beta = 0.5;
    double delta_hp = 0.0;
};

// Power delivered to the chip in W.
double chip_power_w(double applied_power_dbm, double line_attenuation_db);

// Mean photon number <n> = 2/(hbar wr^2) * Ql^2/|Qc| * P_chip.
double photon_number(const circlefit::ResonanceFit& fit, double applied_power_dbm, double line_attenuation_db);
double photon_number(double fr, double ql, double qc_mag, double chip_power_w);

double eval_tls_model(double n, double delta_tls, double n_c, double beta, double delta_hp);
inline double eval_tls_model(double n, const TlsParams& p) {
    return eval_tls_model(n, p.delta_tls, p.n_c, p.beta, p.delta_hp);
}

struct TlsFitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-12;
};

// Weighted least squares on log(delta) versus the model, with beta confined
// to [0.1, 1]. Throws FitError for fewer than 4 points, a flat curve (dynamic
// range below 2x) or non-convergence.
TlsFit fit_tls(std::span<const LossPoint> points, const TlsFitOptions& options = {});

struct SeriesDiagnostic {
    std::string source;
    std::string message;
};

struct Series {
    std::string resonator_id;
    std::vector<LossPoint> points;  // sorted by n_photon
    std::vector<circlefit::ResonanceFit> fits;  // aligned with points
    std::vector<SeriesDiagnostic> diagnostics;  // skipped sweeps
};

inline constexpr std::size_t kMinSeriesPoints = 6;

// Fits every sweep of one resonator and converts it to a loss point. Failed
// fits are skipped and recorded; throws FitError when fewer than six points
// survive and DomainError when the sweeps mix resonators.
Series assemble_series(std::span<const dataio::ComplexSweep> sweeps, const circlefit::FitOptions& options = {});

// Loaded Q and photon number consistent with a power-dependent internal loss:
// solves Qi = 1/delta(<n>), <n> = n(Ql(Qi)) by bisection on log <n>.
struct OperatingPoint {
    double qi = 0.0;
    double ql = 0.0;
    double n_photon = 0.0;
};
OperatingPoint self_consistent_point(const TlsParams& tls, double fr, double qc_mag, double phi, double chip_power_w);

}  // namespace qloss::tlsloss
