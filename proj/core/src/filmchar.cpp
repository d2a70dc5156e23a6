#include "qloss/filmchar.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "qloss/error.hpp"
#include "qloss/lm.hpp"

namespace qloss::filmchar {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kDeg = std::numbers::pi / 180.0;

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

// Robust white-noise level from second differences (std of d2 is sqrt(6) sigma).
double noise_level(std::span<const double> y) {
    if (y.size() < 3) return 0.0;
    std::vector<double> d2;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) d2.push_back(std::abs(y[i + 1] - 2.0 * y[i] + y[i - 1]));
    return 1.4826 * median_of(std::move(d2)) / std::sqrt(6.0);
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

const std::vector<Window>& default_windows() {
    static const std::vector<Window> w{{35.5, 38.5}, {41.5, 44.5}};
    return w;
}

double gaussian(double x, double center, double fwhm) {
    const double u = (x - center) / fwhm;
    return std::exp(-4.0 * kLn2 * u * u);
}

double lorentzian(double x, double center, double fwhm) {
    const double u = (x - center) / fwhm;
    return 1.0 / (1.0 + 4.0 * u * u);
}

double pseudo_voigt(double x, double center, double fwhm, double amplitude, double eta) {
    return amplitude * (eta * lorentzian(x, center, fwhm) + (1.0 - eta) * gaussian(x, center, fwhm));
}

double peak_model(const PeakFit& p, double x) {
    return pseudo_voigt(x, p.center, p.fwhm, p.amplitude, p.eta) + p.baseline_intercept + p.baseline_slope * x;
}

PeakFit fit_peak(const dataio::XrdScan& scan, const Window& window) {
    if (!(window.hi > window.lo)) throw DomainError(fmt::format("empty window [{}, {}]", window.lo, window.hi));
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < scan.size(); ++i) {
        const double t = scan.two_theta()[i];
        if (t >= window.lo && t <= window.hi) {
            x.push_back(t);
            y.push_back(scan.counts()[i]);
        }
    }
    constexpr std::size_t kMinWindowPoints = 15;
    if (x.size() < kMinWindowPoints) {
        throw DomainError(fmt::format("window [{}, {}] holds {} points, at least {} needed", window.lo, window.hi,
                                      x.size(), kMinWindowPoints));
    }
    const std::size_t n = x.size();
    const double xm = 0.5 * (x.front() + x.back());
    const double hw = 0.5 * (x.back() - x.front());

    // Baseline through the mean of the three outermost points on each side.
    const double yl = (y[0] + y[1] + y[2]) / 3.0;
    const double yr = (y[n - 1] + y[n - 2] + y[n - 3]) / 3.0;
    const double xl = (x[0] + x[1] + x[2]) / 3.0;
    const double xr = (x[n - 1] + x[n - 2] + x[n - 3]) / 3.0;
    const double slope0 = (yr - yl) / (xr - xl);
    const auto base0 = [&](double t) { return yl + slope0 * (t - xl); };

    std::vector<double> yb(n);
    for (std::size_t i = 0; i < n; ++i) yb[i] = y[i] - base0(x[i]);
    const std::size_t imax = static_cast<std::size_t>(std::max_element(yb.begin(), yb.end()) - yb.begin());
    const double a0 = yb[imax];
    const double noise = noise_level(y);
    const double ymag = std::max(std::abs(*std::max_element(y.begin(), y.end())),
                                 std::abs(*std::min_element(y.begin(), y.end())));
    const auto no_peak = [&](double amp) {
        return !(amp > 3.0 * noise) || !(amp > 1e-9 * ymag);
    };
    if (no_peak(a0)) {
        throw NoPeakError(fmt::format("no peak in window [{}, {}]: amplitude {:.3g} vs noise {:.3g}", window.lo,
                                   window.hi, a0, noise));
    }

    // Half-height crossings either side of the maximum.
    std::optional<double> left;
    std::optional<double> right;
    for (std::size_t i = imax; i > 0; --i) {
        if (yb[i - 1] < 0.5 * a0) {
            const double t = (0.5 * a0 - yb[i - 1]) / (yb[i] - yb[i - 1]);
            left = x[i - 1] + t * (x[i] - x[i - 1]);
            break;
        }
    }
    for (std::size_t i = imax; i + 1 < n; ++i) {
        if (yb[i + 1] < 0.5 * a0) {
            const double t = (yb[i] - 0.5 * a0) / (yb[i] - yb[i + 1]);
            right = x[i] + t * (x[i + 1] - x[i]);
            break;
        }
    }
    double gamma0 = 0.5 * hw;
    if (left && right) {
        gamma0 = *right - *left;
    } else if (left) {
        gamma0 = 2.0 * (x[imax] - *left);
    } else if (right) {
        gamma0 = 2.0 * (*right - x[imax]);
    }
    gamma0 = std::max(gamma0, 0.5 * (x.back() - x.front()) / static_cast<double>(n - 1));
    const double x00 = x[imax];
    const double scale = std::max(ymag, 1e-300);

    // p = [(x0 - x00)/gamma0, ln fwhm, A/scale, eta, b0'/scale, b1'/scale]
    // with baseline b0' + b1' (x - xm)/hw.
    const auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double x0 = x00 + gamma0 * p[0];
        const double g = std::exp(p[1]);
        const double amp = scale * p[2];
        const double eta = p[3];
        r.resize(static_cast<Eigen::Index>(n));
        if (jac) jac->resize(r.size(), 6);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double u = (x[i] - x0) / g;
            const double G = std::exp(-4.0 * kLn2 * u * u);
            const double L = 1.0 / (1.0 + 4.0 * u * u);
            const double t = (x[i] - xm) / hw;
            const double shape = eta * L + (1.0 - eta) * G;
            r[k] = (amp * shape + scale * (p[4] + p[5] * t) - y[i]) / scale;
            if (jac) {
                const double dG_dx0 = G * 8.0 * kLn2 * u / g;
                const double dL_dx0 = L * L * 8.0 * u / g;
                (*jac)(k, 0) = amp * (eta * dL_dx0 + (1.0 - eta) * dG_dx0) * gamma0 / scale;
                (*jac)(k, 1) = amp * (eta * L * L * 8.0 * u * u + (1.0 - eta) * G * 8.0 * kLn2 * u * u) / scale;
                (*jac)(k, 2) = shape;
                (*jac)(k, 3) = amp * (L - G) / scale;
                (*jac)(k, 4) = 1.0;
                (*jac)(k, 5) = t;
            }
        }
    };

    Eigen::VectorXd p0(6);
    p0 << 0.0, std::log(gamma0), a0 / scale, 0.5, base0(xm) / scale, slope0 * hw / scale;
    lm::Bounds bounds;
    constexpr double inf = std::numeric_limits<double>::infinity();
    bounds.lower = Eigen::VectorXd::Constant(6, -inf);
    bounds.upper = Eigen::VectorXd::Constant(6, inf);
    bounds.lower[3] = 0.0;
    bounds.upper[3] = 1.0;
    const auto res = lm::solve(model, p0, {200, 1e-12, 1e-3}, bounds);

    const Eigen::VectorXd& p = res.params;
    PeakFit out;
    out.window = window;
    out.center = x00 + gamma0 * p[0];
    out.fwhm = std::exp(p[1]);
    out.amplitude = scale * p[2];
    out.eta = p[3];
    out.baseline_slope = scale * p[5] / hw;
    out.baseline_intercept = scale * p[4] - out.baseline_slope * xm;
    out.iterations = res.iterations;
    out.rms_residual = scale * std::sqrt(res.residuals.squaredNorm() / static_cast<double>(n));

    if (no_peak(out.amplitude)) {
        throw NoPeakError(fmt::format("no peak in window [{}, {}]: fitted amplitude {:.3g} vs noise {:.3g}", window.lo,
                                   window.hi, out.amplitude, noise));
    }
    // A noise spike fitted by a one-sample-wide profile can clear the 3x bar.
    const double step = (x.back() - x.front()) / static_cast<double>(n - 1);
    if (!(out.fwhm >= 2.0 * step)) {
        throw NoPeakError(fmt::format("no peak in window [{}, {}]: fitted fwhm {:.3g} deg spans under two samples",
                                      window.lo, window.hi, out.fwhm));
    }
    // Checked after the no-peak tests: on pure noise the iterate often
    // wanders towards a vanishing amplitude or width without settling.
    if (!res.converged()) {
        throw FitError(fmt::format("peak fit in window [{}, {}] did not converge ({})", window.lo, window.hi,
                                   lm::to_string(res.status)));
    }
    if (!(out.center >= x.front() && out.center <= x.back())) {
        throw FitError(fmt::format("peak centre {:.4f} fitted outside window [{}, {}]", out.center, window.lo, window.hi));
    }

    const Eigen::MatrixXd cov = lm::covariance(res);
    const auto var = [&](Eigen::Index i) { return std::max(cov(i, i), 0.0); };
    out.sigma.center = gamma0 * std::sqrt(var(0));
    out.sigma.fwhm = out.fwhm * std::sqrt(var(1));
    out.sigma.amplitude = scale * std::sqrt(var(2));
    out.sigma.eta = std::sqrt(var(3));
    out.sigma.baseline_slope = scale * std::sqrt(var(5)) / hw;
    const double k = xm / hw;
    out.sigma.baseline_intercept = scale * std::sqrt(std::max(var(4) + k * k * var(5) - 2.0 * k * cov(4, 5), 0.0));
    return out;
}

std::vector<PeakFit> fit_peaks(const dataio::XrdScan& scan, std::span<const Window> windows) {
    std::vector<PeakFit> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(fit_peak(scan, w));
    return out;
}

std::string to_string(Orientation o) {
    switch (o) {
        case Orientation::None: return "none";
        case Orientation::TiN111: return "111";
        case Orientation::TiN200: return "200";
        case Orientation::Mixed: return "mixed";
    }
    return "?";
}

OrientationResult classify_orientation(std::span<const PeakFit> peaks) {
    const auto strongest_in = [&](const Window& band) -> const PeakFit* {
        const PeakFit* best = nullptr;
        for (const auto& p : peaks) {
            if (p.center >= band.lo && p.center <= band.hi && (!best || p.amplitude > best->amplitude)) best = &p;
        }
        return best;
    };
    OrientationResult r;
    const PeakFit* p111 = strongest_in(kBand111);
    const PeakFit* p200 = strongest_in(kBand200);
    if (p111) r.shift_111 = p111->center - kTiN111Deg;
    if (p200) r.shift_200 = p200->center - kTiN200Deg;
    if (p111 && p200) {
        r.orientation = Orientation::Mixed;
    } else if (p111) {
        r.orientation = Orientation::TiN111;
    } else if (p200) {
        r.orientation = Orientation::TiN200;
    }
    return r;
}

double scherrer_ratio(const PeakFit& a, const PeakFit& b) {
    if (!(a.fwhm > 0.0) || !(b.fwhm > 0.0)) throw DomainError("Scherrer ratio needs positive widths");
    const double ca = std::cos(0.5 * a.center * kDeg);
    const double cb = std::cos(0.5 * b.center * kDeg);
    return (b.fwhm * cb) / (a.fwhm * ca);
}

SheetStats sheet_stats(std::span<const dataio::SheetMap> maps) {
    if (maps.empty()) throw DomainError("sheet statistics need at least one wafer");
    for (const auto& m : maps) dataio::validate(m);

    const std::set<std::string> labels(maps.front().sites.begin(), maps.front().sites.end());
    if (labels.size() != dataio::SheetMap::kSites) {
        throw DomainError(fmt::format("wafer '{}' repeats a site label", maps.front().wafer_id));
    }
    std::map<std::string, std::vector<double>> by_site;
    SheetStats out;
    out.wafers = maps.size();
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& m : maps) {
        const std::set<std::string> these(m.sites.begin(), m.sites.end());
        if (these != labels) {
            throw DomainError(fmt::format("wafer '{}' site labels differ from wafer '{}'", m.wafer_id,
                                          maps.front().wafer_id));
        }
        for (std::size_t i = 0; i < m.sites.size(); ++i) by_site[m.sites[i]].push_back(m.r_square[i]);
        WaferStats w;
        w.wafer_id = m.wafer_id;
        w.mean = std::accumulate(m.r_square.begin(), m.r_square.end(), 0.0) / static_cast<double>(m.r_square.size());
        w.sigma_pct = 100.0 * sample_std(m.r_square) / w.mean;
        out.max_wafer_sigma_pct = std::max(out.max_wafer_sigma_pct, w.sigma_pct);
        out.per_wafer.push_back(std::move(w));
        total += std::accumulate(m.r_square.begin(), m.r_square.end(), 0.0);
        count += m.r_square.size();
    }
    out.mean = total / static_cast<double>(count);
    for (const auto& [label, values] : by_site) {
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        out.max_pointwise_sigma_pct = std::max(out.max_pointwise_sigma_pct, 100.0 * sample_std(values) / mean);
    }
    return out;
}

double resistivity(double r_square_ohm_sq, double thickness_nm) {
    if (!(r_square_ohm_sq > 0.0) || !(thickness_nm > 0.0)) {
        throw DomainError("resistivity needs positive sheet resistance and thickness");
    }
    // ohm * nm = 1e-7 ohm cm = 0.1 micro-ohm cm
    return r_square_ohm_sq * thickness_nm * 0.1;
}

namespace {

// Linear interpolation of the temperature where R crosses `level`, scanning
// down from index `start`.
std::optional<double> crossing_below(std::span<const double> t, std::span<const double> r, std::size_t start,
                                     double level) {
    for (std::size_t i = start; i > 0; --i) {
        if (r[i - 1] < level && r[i] >= level) {
            const double f = (level - r[i - 1]) / (r[i] - r[i - 1]);
            return t[i - 1] + f * (t[i] - t[i - 1]);
        }
    }
    return std::nullopt;
}

}  // namespace

TcResult extract_tc_rrr(const dataio::RtSweep& sweep) {
    const auto t = sweep.temperature();
    const auto r = sweep.resistance();
    const std::size_t n = sweep.size();

    constexpr double kTarget = 300.0;
    constexpr double kReach = 5.0;
    if (t.back() < kTarget - kReach) {
        throw DomainError(fmt::format("sweep ends at {:.1f} K, needs to reach {:.0f} K", t.back(), kTarget));
    }

    const double rmax = *std::max_element(r.begin(), r.end());
    if (!(rmax > 0.0)) throw FitError("resistance is zero everywhere: no normal state");

    // Index range [i, j) covering [t_i, t_i + span].
    const auto window_end = [&](std::size_t i, double span) {
        return static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), t[i] + span) - t.begin());
    };
    const auto mean_over = [&](std::size_t i, std::size_t j) {
        return std::accumulate(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(j),
                               0.0) /
               static_cast<double>(j - i);
    };

    std::optional<std::size_t> onset;
    double plateau = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j1 = window_end(i, 1.0);
        const double m1 = mean_over(i, j1);
        if (!(m1 > 0.01 * rmax)) continue;
        const std::size_t j20 = window_end(i, 20.0);
        const double local_max = *std::max_element(r.begin() + static_cast<std::ptrdiff_t>(i),
                                                   r.begin() + static_cast<std::ptrdiff_t>(j20));
        if (m1 < 0.5 * local_max) continue;
        if (r[i] >= 0.95 * m1) {
            onset = i;
            plateau = m1;
            break;
        }
    }
    if (!onset) throw FitError("no normal-state plateau found");

    TcResult out;
    out.t_onset = t[*onset];
    out.r_normal = plateau;

    const double rmin_below = *std::min_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(*onset + 1));
    if (!(rmin_below < 0.1 * plateau)) {
        throw FitError(fmt::format("no superconducting transition: resistance stays above {:.3g} ohm (10% of {:.3g})",
                                   0.1 * plateau, plateau));
    }
    const auto t50 = crossing_below(t, r, *onset, 0.5 * plateau);
    const auto t90 = crossing_below(t, r, *onset, 0.9 * plateau);
    const auto t10 = crossing_below(t, r, *onset, 0.1 * plateau);
    if (!t50 || !t90 || !t10) throw FitError("transition crossings could not be located");
    out.tc = *t50;
    out.transition_width = *t90 - *t10;

    if (t.back() >= kTarget) {
        const std::size_t hi = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), kTarget) - t.begin());
        if (t[hi] == kTarget || hi == 0) {
            out.r_300k = r[hi];
        } else {
            const double f = (kTarget - t[hi - 1]) / (t[hi] - t[hi - 1]);
            out.r_300k = r[hi - 1] + f * (r[hi] - r[hi - 1]);
        }
    } else {
        const double f = (kTarget - t[n - 2]) / (t[n - 1] - t[n - 2]);
        out.r_300k = r[n - 2] + f * (r[n - 1] - r[n - 2]);
        out.warnings.push_back(fmt::format("R(300 K) extrapolated from {:.1f} K", t.back()));
    }
    out.rrr = out.r_300k / out.r_normal;
    if (out.rrr < 1.0) out.warnings.push_back(fmt::format("RRR {:.3f} below 1", out.rrr));
    return out;
}

dataio::XrdScan synthesize_xrd(std::span<const PeakSpec> peaks, double lo, double hi, double step, double b0,
                               double b1, double noise_sigma, std::uint64_t seed) {
    if (!(hi > lo) || !(step > 0.0)) throw DomainError("XRD grid needs hi > lo and a positive step");
    if (!(noise_sigma >= 0.0)) throw DomainError("noise sigma must be non-negative");
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(count);
    std::vector<double> y(count);
    for (std::size_t i = 0; i < count; ++i) {
        x[i] = lo + static_cast<double>(i) * step;
        double v = b0 + b1 * x[i];
        for (const auto& p : peaks) v += pseudo_voigt(x[i], p.center, p.fwhm, p.amplitude, p.eta);
        if (noise_sigma > 0.0) v += noise_sigma * normal(rng);
        y[i] = std::max(v, 0.0);
    }
    dataio::Header h{{"kind", "synthetic"}, {"seed", std::to_string(seed)}};
    return {std::move(x), std::move(y), std::move(h)};
}

dataio::RtSweep synthesize_rt(const RtSpec& s, std::uint64_t seed) {
    if (!(s.tc > 0.0) || !(s.width > 0.0) || !(s.r_normal > 0.0) || !(s.rrr > 0.0) || !(s.noise_sigma >= 0.0)) {
        throw DomainError("RT generator needs positive tc, width, r_normal, rrr");
    }
    std::vector<double> t;
    for (int k = 0; k <= 1980; ++k) t.push_back(0.1 + 0.005 * k);  // 0.1 .. 10.0 K
    for (int k = 1; k <= 580; ++k) t.push_back(10.0 + 0.5 * k);   // .. 300 K

    const double w = s.width / (2.0 * std::log(9.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> r(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        double rn = s.r_normal;
        if (t[i] > 20.0) {
            const double u = (t[i] - 20.0) / 280.0;
            rn *= 1.0 + (s.rrr - 1.0) * u * u;
        }
        double v = rn / (1.0 + std::exp(-(t[i] - s.tc) / w));
        if (s.noise_sigma > 0.0) v += s.noise_sigma * normal(rng);
        r[i] = std::max(v, 0.0);
    }
    dataio::Header h{{"kind", "synthetic"},
                     {"tc_k", fmt::format("{}", s.tc)},
                     {"width_k", fmt::format("{}", s.width)},
                     {"r_normal_ohm", fmt::format("{}", s.r_normal)},
                     {"rrr", fmt::format("{}", s.rrr)},
                     {"seed", std::to_string(seed)}};
    return {std::move(t), std::move(r), std::move(h)};
}

}  // namespace qloss::filmchar
