#include "qloss/circlefit.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "qloss/error.hpp"
#include "qloss/lm.hpp"

namespace qloss::circlefit {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double x) {
    x = std::remainder(x, kTwoPi);
    if (x <= -kPi) x += kTwoPi;
    return x;
}

std::vector<double> unwrap(std::span<const double> phase) {
    std::vector<double> out(phase.begin(), phase.end());
    double offset = 0.0;
    for (std::size_t i = 1; i < out.size(); ++i) {
        const double d = phase[i] - phase[i - 1];
        offset -= kTwoPi * std::round(d / kTwoPi);
        out[i] = phase[i] + offset;
    }
    return out;
}

std::vector<double> moving_average(std::span<const double> x, std::size_t width) {
    std::vector<double> out(x.size());
    const std::size_t half = width / 2;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(x.size() - 1, i + half);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += x[j];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), mid));
    }
    return m;
}

// Per-quadrature noise estimate from second differences, which cancel the
// smooth signal to first order.
double noise_floor(std::span<const cd> z) {
    if (z.size() < 3) return 0.0;
    std::vector<double> d2;
    d2.reserve(z.size() - 2);
    for (std::size_t i = 1; i + 1 < z.size(); ++i) d2.push_back(std::norm(z[i + 1] - 2.0 * z[i] + z[i - 1]));
    // E|d2|^2 = 12 sigma^2; the median of a 2-dof chi-square is ln 2 of its mean.
    return std::sqrt(median_of(std::move(d2)) / (12.0 * std::numbers::ln2));
}

double circle_residual(std::span<const cd> z, const Circle& c) {
    double s = 0.0;
    for (const auto p : z) {
        const double d = std::abs(p - c.center) - c.radius;
        s += d * d;
    }
    return s / static_cast<double>(z.size());
}

std::vector<cd> remove_delay(std::span<const double> f, std::span<const cd> z, double tau, double f_ref) {
    std::vector<cd> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * std::polar(1.0, kTwoPi * (f[i] - f_ref) * tau);
    return out;
}

double reference_frequency(std::span<const double> f) { return 0.5 * (f.front() + f.back()); }

// Straight-line delay estimate from the outer segments, sharing the slope but
// with independent offsets so a 2 pi winding across the dip does not bias it.
double linear_delay(std::span<const double> f, std::span<const cd> z) {
    const std::size_t n = f.size();
    const std::size_t outer = std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n))));
    const std::size_t segs[2][2] = {{0, outer}, {n - outer, n}};
    const double f_ref = reference_frequency(f);

    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& seg : segs) {
        std::vector<double> ph;
        ph.reserve(seg[1] - seg[0]);
        for (std::size_t i = seg[0]; i < seg[1]; ++i) {
            if (!(std::abs(z[i]) > 0.0)) throw FitError("phase unwrap failed: zero-magnitude S21 point");
            ph.push_back(std::arg(z[i]));
        }
        for (std::size_t i = 1; i < ph.size(); ++i) {
            if (std::abs(wrap_angle(ph[i] - ph[i - 1])) > 0.9 * kPi) {
                throw FitError(fmt::format(
                    "phase unwrap failed: adjacent-point phase step near pi at point {} (delay undersampled)",
                    seg[0] + i + 1));
            }
        }
        const auto uw = unwrap(ph);
        double mf = 0.0;
        double mp = 0.0;
        for (std::size_t i = 0; i < uw.size(); ++i) {
            mf += f[seg[0] + i] - f_ref;
            mp += uw[i];
        }
        mf /= static_cast<double>(uw.size());
        mp /= static_cast<double>(uw.size());
        for (std::size_t i = 0; i < uw.size(); ++i) {
            const double df = f[seg[0] + i] - f_ref - mf;
            sxy += df * (uw[i] - mp);
            sxx += df * df;
        }
    }
    if (!(sxx > 0.0)) throw FitError("phase unwrap failed: degenerate frequency grid");
    return -(sxy / sxx) / kTwoPi;
}

struct DelayEstimate {
    double tau = 0.0;
    bool refined = false;
};

DelayEstimate estimate_delay_impl(std::span<const double> f, std::span<const cd> z) {
    if (f.size() < dataio::ComplexSweep::kMinPoints) throw DomainError("delay estimation needs at least 32 points");
    DelayEstimate est;
    est.tau = linear_delay(f, z);

    const double f_ref = reference_frequency(f);
    const double span = f.back() - f.front();

    // Without a visible resonance the circle residual carries no delay
    // information; keep the straight-line estimate.
    {
        const auto zc = remove_delay(f, z, est.tau, f_ref);
        cd mean = 0.0;
        for (const auto p : zc) mean += p;
        mean /= static_cast<double>(zc.size());
        double spread = 0.0;
        for (const auto p : zc) spread = std::max(spread, std::abs(p - mean));
        const double floor = noise_floor(zc);
        if (!(spread > 10.0 * floor) || !(spread > 1e-9 * std::abs(mean))) return est;
    }

    // u is the delay offset in units of 1/span.
    const double tau0 = est.tau;
    const auto cost = [&](double u) {
        const auto zc = remove_delay(f, z, tau0 + u / span, f_ref);
        try {
            return circle_residual(zc, fit_circle(zc));
        } catch (const DomainError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    constexpr int kGrid = 81;
    constexpr double kHalfWidth = 1.0;
    const double du = 2.0 * kHalfWidth / (kGrid - 1);
    double best_u = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kGrid; ++k) {
        const double u = -kHalfWidth + du * k;
        const double c = cost(u);
        if (c < best) {
            best = c;
            best_u = u;
        }
    }
    if (!std::isfinite(best)) return est;

    std::uintmax_t max_iter = 200;
    const auto [u_min, c_min] = boost::math::tools::brent_find_minima(cost, best_u - du, best_u + du, 40, max_iter);
    est.tau = tau0 + (c_min <= best ? u_min : best_u) / span;
    est.refined = true;
    return est;
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(fmt::format("{} must be positive and finite", what));
}

}  // namespace

double internal_q(double ql, double qc_mag, double phi) {
    require_positive(ql, "Ql");
    if (!(qc_mag > 0.0)) throw DomainError("|Qc| must be positive");
    return 1.0 / (1.0 / ql - std::cos(phi) / qc_mag);
}

cd notch_s21(const NotchParams& p, double f) {
    const cd env = p.a * std::polar(1.0, p.alpha - kTwoPi * f * p.tau);
    if (std::isinf(p.qc_mag)) return env;
    const cd denom(1.0, 2.0 * p.ql * (f / p.fr - 1.0));
    return env * (1.0 - (p.ql / p.qc_mag) * std::polar(1.0, p.phi) / denom);
}

dataio::ComplexSweep synthesize_notch(const NotchParams& p, std::span<const double> frequencies, double noise_sigma,
                                      std::uint64_t seed, dataio::SweepMetadata meta) {
    if (frequencies.empty()) throw DomainError("synthesize_notch: empty frequency grid");
    require_positive(p.fr, "fr");
    require_positive(p.ql, "Ql");
    if (!(p.qc_mag > 0.0)) throw DomainError("|Qc| must be positive");
    if (!(noise_sigma >= 0.0)) throw DomainError("noise sigma must be non-negative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<cd> s21;
    s21.reserve(frequencies.size());
    for (const double f : frequencies) {
        cd s = notch_s21(p, f);
        if (noise_sigma > 0.0) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            s += noise_sigma * cd(re, im);
        }
        s21.push_back(s);
    }
    if (meta.resonator_id.empty()) meta.resonator_id = "synthetic";
    if (meta.chip_id.empty()) meta.chip_id = "synthetic";
    return dataio::ComplexSweep(std::vector<double>(frequencies.begin(), frequencies.end()), std::move(s21),
                                std::move(meta));
}

std::vector<double> linewidth_grid(double fr, double ql, double span_linewidths, std::size_t points) {
    require_positive(fr, "fr");
    require_positive(ql, "Ql");
    if (points < 2) throw DomainError("frequency grid needs at least 2 points");
    const double span = span_linewidths * fr / ql;
    std::vector<double> f(points);
    for (std::size_t i = 0; i < points; ++i) {
        f[i] = fr - 0.5 * span + span * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return f;
}

Circle fit_circle(std::span<const cd> points) {
    if (points.size() < 3) throw DomainError("circle fit needs at least 3 points");
    const double n = static_cast<double>(points.size());
    cd mean = 0.0;
    for (const auto p : points) mean += p;
    mean /= n;
    double spread2 = 0.0;
    for (const auto p : points) spread2 += std::norm(p - mean);
    spread2 /= n;
    const double s = std::sqrt(spread2);
    if (!(s > 0.0) || !std::isfinite(s) || s < 1e-300) throw DomainError("circle fit: coincident points");

    double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
    for (const auto p : points) {
        const double x = (p.real() - mean.real()) / s;
        const double y = (p.imag() - mean.imag()) / s;
        const double zz = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * zz;
        myz += y * zz;
        mzz += zz * zz;
    }
    mxx /= n;
    myy /= n;
    mxy /= n;
    mxz /= n;
    myz /= n;
    mzz /= n;

    // Taubin's characteristic polynomial, solved by Newton from x = 0.
    const double mz = mxx + myy;
    const double cov_xy = mxx * myy - mxy * mxy;
    const double var_z = mzz - mz * mz;
    const double a3 = 4.0 * mz;
    const double a2 = -3.0 * mz * mz - mzz;
    const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    const double a22 = a2 + a2;
    const double a33 = a3 + a3 + a3;

    double x = 0.0;
    double y = a0;
    for (int iter = 0; iter < 99; ++iter) {
        const double dy = a1 + x * (a22 + a33 * x);
        const double x_new = x - y / dy;
        if (x_new == x || !std::isfinite(x_new)) break;
        const double y_new = a0 + x_new * (a1 + x_new * (a2 + x_new * a3));
        if (std::abs(y_new) >= std::abs(y)) break;
        x = x_new;
        y = y_new;
    }

    const double det = x * x - x * mz + cov_xy;
    if (!(std::abs(det) > 1e-14) || !std::isfinite(det)) throw DomainError("circle fit: collinear points");
    const double xc = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    const double yc = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    const double r = std::sqrt(xc * xc + yc * yc + mz);
    if (!std::isfinite(r) || r > 1e7) throw DomainError("circle fit: collinear points");

    return {mean + s * cd(xc, yc), s * r};
}

double estimate_delay(const dataio::ComplexSweep& sweep) {
    const auto est = estimate_delay_impl(sweep.frequency(), sweep.s21());
    if (!est.refined) return est.tau;
    // The circle criterion alone pins tau to about 1% under noise; where
    // points sit on the circle versus frequency pins it much tighter.
    try {
        return fit_resonance(sweep).tau;
    } catch (const FitError&) {
        return est.tau;
    }
}

namespace {

struct PhaseFit {
    double theta0 = 0.0;
    double ql = 0.0;
    double fr = 0.0;
};

// theta(f) = theta0 + 2 atan(2 Ql (1 - f/fr)) on the phase around the centre.
PhaseFit fit_phase(std::span<const double> f, std::span<const double> theta, PhaseFit init, const FitOptions& opt) {
    const double lw0 = init.fr / init.ql;
    const auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double ql = std::exp(p[1]);
        const double fr = init.fr + p[2] * lw0;
        r.resize(static_cast<Eigen::Index>(f.size()));
        if (jac) jac->resize(r.size(), 3);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double v = 2.0 * ql * (1.0 - f[i] / fr);
            r[k] = p[0] + 2.0 * std::atan(v) - theta[i];
            if (jac) {
                const double g = 2.0 / (1.0 + v * v);
                (*jac)(k, 0) = 1.0;
                (*jac)(k, 1) = g * v;
                (*jac)(k, 2) = g * 2.0 * ql * f[i] / (fr * fr) * lw0;
            }
        }
    };
    Eigen::VectorXd p0(3);
    p0 << init.theta0, std::log(init.ql), 0.0;
    const auto res = lm::solve(model, p0, {opt.max_iterations, 1e-12, 1e-3});
    if (res.status == lm::Status::NumericalFailure) throw FitError("phase fit failed numerically");
    return {res.params[0], std::exp(res.params[1]), init.fr + res.params[2] * lw0};
}

struct Guess {
    std::size_t index = 0;  // resonance index
    double fr = 0.0;
    double ql = 0.0;
};

// fr from the fastest motion along the trace near the deepest dip; Ql from
// the full width at half depth of |S21|^2.
Guess initial_guess(std::span<const double> f, std::span<const cd> z) {
    const std::size_t n = f.size();
    std::vector<double> mag2(n);
    for (std::size_t i = 0; i < n; ++i) mag2[i] = std::norm(z[i]);
    const auto smooth = moving_average(mag2, 5);

    const std::size_t edge = std::max<std::size_t>(2, n / 10);
    std::vector<double> outer;
    for (std::size_t i = 0; i < edge; ++i) {
        outer.push_back(smooth[i]);
        outer.push_back(smooth[n - 1 - i]);
    }
    const double base = median_of(outer);
    const auto imin = static_cast<std::size_t>(std::min_element(smooth.begin(), smooth.end()) - smooth.begin());
    const double half = 0.5 * (base + smooth[imin]);

    std::optional<double> f_left;
    std::optional<double> f_right;
    std::size_t i_left = 0;
    std::size_t i_right = n - 1;
    for (std::size_t i = imin; i > 0; --i) {
        if (smooth[i - 1] >= half) {
            const double t = (half - smooth[i]) / (smooth[i - 1] - smooth[i]);
            f_left = f[i] + t * (f[i - 1] - f[i]);
            i_left = i - 1;
            break;
        }
    }
    for (std::size_t i = imin; i + 1 < n; ++i) {
        if (smooth[i + 1] >= half) {
            const double t = (half - smooth[i]) / (smooth[i + 1] - smooth[i]);
            f_right = f[i] + t * (f[i + 1] - f[i]);
            i_right = i + 1;
            break;
        }
    }

    // Fastest point along the trace, restricted to the deepest dip.
    std::vector<double> speed(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) speed[i] = std::abs(z[i + 1] - z[i - 1]) / (f[i + 1] - f[i - 1]);
    speed = moving_average(speed, 5);
    const std::size_t width = i_right - i_left + 1;
    const std::size_t lo = i_left > width ? i_left - width : 1;
    const std::size_t hi = std::min(n - 2, i_right + width);
    std::size_t ires = imin;
    for (std::size_t i = lo; i <= hi; ++i) {
        if (speed[i] > speed[ires]) ires = i;
    }

    Guess g;
    g.index = ires;
    g.fr = f[ires];
    double fwhm = 0.0;
    if (f_left && f_right) {
        fwhm = *f_right - *f_left;
    } else if (f_left) {
        fwhm = 2.0 * (f[imin] - *f_left);
    } else if (f_right) {
        fwhm = 2.0 * (*f_right - f[imin]);
    }
    if (!(fwhm > 0.0)) fwhm = (f.back() - f.front()) / 10.0;
    g.ql = g.fr / fwhm;
    return g;
}

}  // namespace

ResonanceFit fit_resonance(const dataio::ComplexSweep& sweep, const FitOptions& options) {
    const auto f = sweep.frequency();
    const auto z = sweep.s21();
    const std::size_t n = f.size();
    const double f_ref = reference_frequency(f);
    const double span = f.back() - f.front();

    // 1. cable delay
    const double tau0 = estimate_delay_impl(f, z).tau;
    const auto zc = remove_delay(f, z, tau0, f_ref);

    // 2. circle, with a visibility check against the noise floor
    Circle circle;
    try {
        circle = fit_circle(zc);
    } catch (const DomainError&) {
        throw FitError("no dip found: delay-corrected trace does not trace a circle");
    }
    {
        const std::size_t edge = std::max<std::size_t>(2, n / 10);
        cd bg = 0.0;
        for (std::size_t i = 0; i < edge; ++i) bg += zc[i] + zc[n - 1 - i];
        bg /= static_cast<double>(2 * edge);
        double excursion = 0.0;
        for (const auto p : zc) excursion = std::max(excursion, std::abs(p - bg));
        const double floor = noise_floor(zc);
        if (!(excursion > 6.0 * floor) || !(excursion > 1e-9 * std::abs(bg)) ||
            !(circle.radius > 2.0 * floor)) {
            throw FitError(fmt::format("no dip found: circle radius {:.3g} below noise floor {:.3g}", circle.radius,
                                       floor));
        }
    }

    // 3. phase around the circle centre
    const Guess guess = initial_guess(f, zc);
    std::vector<double> theta(n);
    for (std::size_t i = 0; i < n; ++i) theta[i] = std::arg(zc[i] - circle.center);
    theta = unwrap(theta);
    const PhaseFit phase = fit_phase(f, theta, {theta[guess.index], guess.ql, guess.fr}, options);
    if (!(phase.ql > 0.0) || !std::isfinite(phase.fr)) throw FitError("phase fit produced unphysical values");

    // 4. environment from the off-resonant point, then coupling
    const cd off_res = circle.center + circle.radius * std::polar(1.0, phase.theta0 + kPi);
    const double a0 = std::abs(off_res);
    if (!(a0 > 0.0)) throw FitError("off-resonant point at the origin");
    const double alpha_ref0 = std::arg(off_res);
    const cd center_n = circle.center / off_res;
    const double rn = circle.radius / a0;
    const double phi0 = std::arg(1.0 - center_n);
    const double qc0 = phase.ql / (2.0 * rn);

    // 5. joint refinement of all seven parameters
    const double fr0 = phase.fr;
    const double lw0 = fr0 / phase.ql;
    const double tau_scale = kTwoPi * span;

    const auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double fr = fr0 + p[0] * lw0;
        const double ql = std::exp(p[1]);
        const double qc = std::exp(p[2]);
        const double phi = p[3];
        const double a = std::exp(p[4]);
        const double alpha = p[5];
        const double tau = p[6] / tau_scale;
        const double k = ql / qc;
        const cd eiphi = std::polar(1.0, phi);
        const auto m = static_cast<Eigen::Index>(n);
        r.resize(2 * m);
        if (jac) jac->resize(2 * m, 7);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double df = f[i] - f_ref;
            const cd env = a * std::polar(1.0, alpha - kTwoPi * df * tau);
            const cd d(1.0, 2.0 * ql * (f[i] / fr - 1.0));
            const cd t = k * eiphi / d;
            const cd s = env * (1.0 - t);
            const cd res = s - z[i];
            r[row] = res.real();
            r[row + m] = res.imag();
            if (jac) {
                const cd t_over_d = t / d;
                cd col[7];
                col[0] = env * t_over_d * cd(0.0, -2.0 * ql * f[i] / (fr * fr)) * lw0;
                col[1] = -env * t_over_d;
                col[2] = env * t;
                col[3] = -env * cd(0.0, 1.0) * t;
                col[4] = s;
                col[5] = cd(0.0, 1.0) * s;
                col[6] = cd(0.0, -kTwoPi * df / tau_scale) * s;
                for (Eigen::Index c = 0; c < 7; ++c) {
                    (*jac)(row, c) = col[c].real();
                    (*jac)(row + m, c) = col[c].imag();
                }
            }
        }
    };

    if (!(qc0 > 0.0) || !std::isfinite(qc0)) throw FitError("coupling estimate is unphysical");
    Eigen::VectorXd p0(7);
    p0 << 0.0, std::log(phase.ql), std::log(qc0), phi0, std::log(a0), alpha_ref0, tau0 * tau_scale;
    const auto res = lm::solve(model, p0, {options.max_iterations, options.step_tolerance, 1e-3});
    if (!res.converged()) {
        throw FitError(fmt::format("resonance refinement did not converge ({} after {} iterations)",
                                   lm::to_string(res.status), res.iterations));
    }

    const Eigen::VectorXd& p = res.params;
    ResonanceFit fit;
    fit.fr = fr0 + p[0] * lw0;
    fit.ql = std::exp(p[1]);
    fit.qc_mag = std::exp(p[2]);
    fit.phi = wrap_angle(p[3]);
    fit.a = std::exp(p[4]);
    fit.tau = p[6] / tau_scale;
    fit.alpha = wrap_angle(p[5] + kTwoPi * f_ref * fit.tau);
    fit.iterations = res.iterations;
    fit.rms_residual = std::sqrt(res.residuals.squaredNorm() / static_cast<double>(res.residuals.size()));

    if (!(std::abs(fit.phi) < 0.5 * kPi)) {
        throw FitError(fmt::format("fitted mismatch angle {:.4f} rad outside (-pi/2, pi/2)", fit.phi));
    }
    if (!(fit.fr >= f.front() && fit.fr <= f.back())) {
        throw FitError(fmt::format("fitted fr {:.9g} Hz outside the sweep span", fit.fr));
    }
    fit.qi = internal_q(fit.ql, fit.qc_mag, fit.phi);
    if (!(fit.qi > 0.0) || !std::isfinite(fit.qi)) {
        throw FitError(fmt::format("unphysical internal Q {:.4g} (Ql={:.4g}, |Qc|={:.4g}, phi={:.4f})", fit.qi, fit.ql,
                                   fit.qc_mag, fit.phi));
    }

    const Eigen::MatrixXd cov = lm::covariance(res);
    const auto sd = [&](Eigen::Index i) { return std::sqrt(std::max(cov(i, i), 0.0)); };
    fit.sigma.fr = lw0 * sd(0);
    fit.sigma.ql = fit.ql * sd(1);
    fit.sigma.qc_mag = fit.qc_mag * sd(2);
    fit.sigma.phi = sd(3);
    fit.sigma.a = fit.a * sd(4);
    fit.sigma.tau = sd(6) / tau_scale;
    {
        Eigen::Vector2d g(1.0, kTwoPi * f_ref / tau_scale);
        Eigen::Matrix2d c;
        c << cov(5, 5), cov(5, 6), cov(6, 5), cov(6, 6);
        fit.sigma.alpha = std::sqrt(std::max(g.dot(c * g), 0.0));
    }
    {
        const double qi2 = fit.qi * fit.qi;
        Eigen::Vector3d g(qi2 / fit.ql, -qi2 * std::cos(fit.phi) / fit.qc_mag, -qi2 * std::sin(fit.phi) / fit.qc_mag);
        Eigen::Matrix3d c = cov.block<3, 3>(1, 1);
        fit.sigma.qi = std::sqrt(std::max(g.dot(c * g), 0.0));
    }

    if (span < 3.0 * fit.fr / fit.ql) {
        fit.warnings.push_back(fmt::format("sweep spans {:.2f} linewidths, fewer than 3", span * fit.ql / fit.fr));
    }
    return fit;
}

}  // namespace qloss::circlefit
