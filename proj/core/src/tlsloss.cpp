#include "qloss/tlsloss.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "qloss/error.hpp"
#include "qloss/lm.hpp"

namespace qloss::tlsloss {

double chip_power_w(double applied_power_dbm, double line_attenuation_db) {
    if (!(line_attenuation_db >= 0.0)) throw DomainError("line attenuation must be non-negative");
    if (!std::isfinite(applied_power_dbm)) throw DomainError("applied power must be finite");
    return std::pow(10.0, (applied_power_dbm - line_attenuation_db - 30.0) / 10.0);
}

double photon_number(double fr, double ql, double qc_mag, double chip_power_w) {
    if (!(fr > 0.0) || !(ql > 0.0) || !(qc_mag > 0.0) || !(chip_power_w > 0.0)) {
        throw DomainError("photon number needs positive fr, Ql, |Qc| and power");
    }
    const double wr = 2.0 * std::numbers::pi * fr;
    return 2.0 / (kHbar * wr * wr) * (ql * ql / qc_mag) * chip_power_w;
}

double photon_number(const circlefit::ResonanceFit& fit, double applied_power_dbm, double line_attenuation_db) {
    return photon_number(fit.fr, fit.ql, fit.qc_mag, chip_power_w(applied_power_dbm, line_attenuation_db));
}

double eval_tls_model(double n, double delta_tls, double n_c, double beta, double delta_hp) {
    return delta_tls / std::pow(1.0 + n / n_c, beta) + delta_hp;
}

namespace {

struct Start {
    double n_c;
    double beta;
};

}  // namespace

TlsFit fit_tls(std::span<const LossPoint> points, const TlsFitOptions& options) {
    constexpr std::size_t kParams = 4;
    if (points.size() < kParams) {
        throw FitError(fmt::format("TLS fit needs at least {} points, got {}", kParams, points.size()));
    }
    for (const auto& p : points) {
        if (!(p.n_photon > 0.0) || !(p.delta > 0.0) || !std::isfinite(p.n_photon) || !std::isfinite(p.delta)) {
            throw DomainError("loss points need positive, finite photon number and loss");
        }
    }

    const auto [dmin_it, dmax_it] =
        std::minmax_element(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.delta < b.delta; });
    const double dmin = dmin_it->delta;
    const double dmax = dmax_it->delta;
    if (dmax < 2.0 * dmin) {
        throw FitError(fmt::format("loss varies by only {:.3g}x (< 2x): TLS parameters are unidentifiable", dmax / dmin));
    }

    TlsFit out;
    out.points = points.size();
    const auto [nmin_it, nmax_it] = std::minmax_element(
        points.begin(), points.end(), [](const auto& a, const auto& b) { return a.n_photon < b.n_photon; });
    const double decades = std::log10(nmax_it->n_photon / nmin_it->n_photon);
    if (points.size() < kMinSeriesPoints) {
        out.warnings.push_back(fmt::format("only {} points (>= {} recommended)", points.size(), kMinSeriesPoints));
    }
    if (decades < 3.0) {
        out.warnings.push_back(fmt::format("photon numbers span {:.2f} decades (>= 3 recommended)", decades));
    }

    const bool weighted = std::all_of(points.begin(), points.end(), [](const auto& p) {
        return p.sigma_delta > 0.0 && std::isfinite(p.sigma_delta);
    });
    std::vector<double> w(points.size(), 1.0);
    if (weighted) {
        // In log space the standard error of delta becomes sigma/delta.
        for (std::size_t i = 0; i < points.size(); ++i) w[i] = points[i].delta / points[i].sigma_delta;
        const double wmax = *std::max_element(w.begin(), w.end());
        for (auto& x : w) x /= wmax;
    }

    const auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double dtls = std::exp(p[0]);
        const double dhp = std::exp(p[1]);
        const double nc = std::exp(p[2]);
        const double beta = p[3];
        r.resize(static_cast<Eigen::Index>(points.size()));
        if (jac) jac->resize(r.size(), 4);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double x = points[i].n_photon / nc;
            const double s = std::pow(1.0 + x, -beta);
            const double m = dtls * s + dhp;
            r[k] = w[i] * (std::log(m) - std::log(points[i].delta));
            if (jac) {
                (*jac)(k, 0) = w[i] * dtls * s / m;
                (*jac)(k, 1) = w[i] * dhp / m;
                (*jac)(k, 2) = w[i] * dtls * beta * s * x / (1.0 + x) / m;
                (*jac)(k, 3) = -w[i] * dtls * s * std::log1p(x) / m;
            }
        }
    };

    std::vector<double> logn;
    for (const auto& p : points) logn.push_back(std::log(p.n_photon));
    std::sort(logn.begin(), logn.end());
    const double n_mid = std::exp(logn.size() % 2 ? logn[logn.size() / 2]
                                                  : 0.5 * (logn[logn.size() / 2 - 1] + logn[logn.size() / 2]));

    lm::Bounds bounds;
    bounds.lower = Eigen::Vector4d(-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                                   -std::numeric_limits<double>::infinity(), kBetaMin);
    bounds.upper = Eigen::Vector4d(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity(), kBetaMax);

    // The documented start first; alternates only replace it when they reach a
    // strictly lower cost.
    const Start starts[] = {{n_mid, 0.5}, {n_mid * 100.0, 0.5}, {n_mid / 100.0, 0.5}, {n_mid, 0.9}, {n_mid, 0.2}};
    std::optional<lm::Result> best;
    lm::Status last_status = lm::Status::NumericalFailure;
    for (const auto& st : starts) {
        Eigen::VectorXd p0(4);
        p0 << std::log(dmax - dmin), std::log(dmin), std::log(st.n_c), st.beta;
        auto res = lm::solve(model, p0, {options.max_iterations, options.step_tolerance, 1e-3}, bounds);
        last_status = res.status;
        if (!res.converged()) continue;
        if (!best || res.cost < best->cost * (1.0 - 1e-12)) best = std::move(res);
    }
    if (!best) {
        throw FitError(fmt::format("TLS fit did not converge ({})", lm::to_string(last_status)));
    }

    const Eigen::VectorXd& p = best->params;
    out.delta_tls = std::exp(p[0]);
    out.delta_hp = std::exp(p[1]);
    out.n_c = std::exp(p[2]);
    out.beta = p[3];
    out.delta_lp = out.delta_tls + out.delta_hp;
    // Re-derive so that delta_lp - delta_hp == delta_tls holds bit for bit.
    out.delta_tls = out.delta_lp - out.delta_hp;
    out.iterations = best->iterations;
    out.beta_at_bound = best->at_lower[3] || best->at_upper[3];
    if (out.beta_at_bound) {
        out.warnings.push_back(fmt::format("beta clamped to bound {:.2f}", out.beta));
    }
    out.rms_residual = std::sqrt(best->residuals.squaredNorm() / static_cast<double>(best->residuals.size()));

    const Eigen::MatrixXd cov = lm::covariance(*best);
    const auto sd = [&](Eigen::Index i) { return std::sqrt(std::max(cov(i, i), 0.0)); };
    out.sigma.delta_tls = out.delta_tls * sd(0);
    out.sigma.delta_hp = out.delta_hp * sd(1);
    out.sigma.n_c = out.n_c * sd(2);
    out.sigma.beta = sd(3);
    {
        const Eigen::Vector2d g(out.delta_tls, out.delta_hp);
        const Eigen::Matrix2d c = cov.block<2, 2>(0, 0);
        out.sigma.delta_lp = std::sqrt(std::max(g.dot(c * g), 0.0));
    }
    return out;
}

Series assemble_series(std::span<const dataio::ComplexSweep> sweeps, const circlefit::FitOptions& options) {
    if (sweeps.empty()) throw DomainError("assemble_series: no sweeps given");
    Series series;
    series.resonator_id = sweeps.front().meta().resonator_id;
    for (const auto& s : sweeps) {
        if (s.meta().resonator_id != series.resonator_id) {
            throw DomainError(fmt::format("assemble_series: sweep '{}' belongs to resonator '{}', expected '{}'",
                                          s.meta().source, s.meta().resonator_id, series.resonator_id));
        }
    }

    std::vector<std::pair<LossPoint, circlefit::ResonanceFit>> rows;
    for (const auto& s : sweeps) {
        try {
            auto fit = circlefit::fit_resonance(s, options);
            LossPoint lp;
            lp.n_photon = photon_number(fit, s.meta().applied_power_dbm, s.meta().line_attenuation_db);
            lp.delta = 1.0 / fit.qi;
            lp.sigma_delta = fit.sigma.qi / (fit.qi * fit.qi);
            lp.applied_power_dbm = s.meta().applied_power_dbm;
            lp.source = s.meta().source;
            rows.emplace_back(lp, std::move(fit));
        } catch (const Error& e) {
            series.diagnostics.push_back({s.meta().source, e.what()});
        }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first.n_photon < b.first.n_photon; });
    for (auto& [lp, fit] : rows) {
        series.points.push_back(lp);
        series.fits.push_back(std::move(fit));
    }
    if (series.points.size() < kMinSeriesPoints) {
        throw FitError(fmt::format("resonator '{}': only {} of {} sweeps fitted, at least {} needed",
                                   series.resonator_id, series.points.size(), sweeps.size(), kMinSeriesPoints));
    }
    return series;
}

OperatingPoint self_consistent_point(const TlsParams& tls, double fr, double qc_mag, double phi, double chip_power_w) {
    if (!(tls.delta_tls >= 0.0) || !(tls.delta_hp > 0.0) || !(tls.n_c > 0.0) || !(tls.beta > 0.0)) {
        throw DomainError("TLS parameters must be positive");
    }
    const auto ql_of = [&](double qi) { return 1.0 / (1.0 / qi + std::cos(phi) / qc_mag); };
    const auto g = [&](double n) {
        const double qi = 1.0 / eval_tls_model(n, tls);
        return photon_number(fr, ql_of(qi), qc_mag, chip_power_w);
    };
    // g is increasing and bounded, so the fixed point lies in [g(0), g(inf)].
    double lo = std::log(g(0.0));
    double hi = std::log(photon_number(fr, ql_of(1.0 / tls.delta_hp), qc_mag, chip_power_w));
    if (hi - lo < 1e-15) {
        hi = lo;
    } else {
        for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
            const double mid = 0.5 * (lo + hi);
            if (std::log(g(std::exp(mid))) > mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    const double n = std::exp(0.5 * (lo + hi));
    OperatingPoint op;
    op.qi = 1.0 / eval_tls_model(n, tls);
    op.ql = ql_of(op.qi);
    op.n_photon = photon_number(fr, op.ql, qc_mag, chip_power_w);
    return op;
}

}  // namespace qloss::tlsloss
