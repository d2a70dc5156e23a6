#include "qloss/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qloss::lm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd clamp(const Eigen::VectorXd& p, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return p.cwiseMax(lo).cwiseMin(hi);
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

Result solve(const Model& model, Eigen::VectorXd initial, const Options& options, const Bounds& bounds) {
    const Eigen::Index n = initial.size();
    const Eigen::VectorXd lo = bounds.lower.size() == n ? bounds.lower : Eigen::VectorXd::Constant(n, -kInf);
    const Eigen::VectorXd hi = bounds.upper.size() == n ? bounds.upper : Eigen::VectorXd::Constant(n, kInf);

    Result res;
    res.params = clamp(initial, lo, hi);
    model(res.params, res.residuals, &res.jacobian);
    if (!all_finite(res.residuals) || !res.jacobian.allFinite()) {
        res.status = Status::NumericalFailure;
        return res;
    }
    res.cost = 0.5 * res.residuals.squaredNorm();

    double lambda = options.initial_lambda;
    Eigen::VectorXd trial_r;

    const auto finish = [&](Status s) {
        res.status = s;
        res.at_lower.assign(static_cast<std::size_t>(n), false);
        res.at_upper.assign(static_cast<std::size_t>(n), false);
        for (Eigen::Index i = 0; i < n; ++i) {
            res.at_lower[static_cast<std::size_t>(i)] = std::isfinite(lo[i]) && res.params[i] <= lo[i];
            res.at_upper[static_cast<std::size_t>(i)] = std::isfinite(hi[i]) && res.params[i] >= hi[i];
        }
        return res;
    };

    for (res.iterations = 1; res.iterations <= options.max_iterations; ++res.iterations) {
        if (res.cost == 0.0) return finish(Status::Converged);

        const Eigen::VectorXd g = res.jacobian.transpose() * res.residuals;
        const Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;

        // Parameters held at a bound by the gradient are frozen for this step.
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool pinned_lo = res.params[i] <= lo[i] && g[i] > 0.0;
            const bool pinned_hi = res.params[i] >= hi[i] && g[i] < 0.0;
            if (!pinned_lo && !pinned_hi) free.push_back(i);
        }
        if (free.empty()) return finish(Status::Converged);

        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd a(nf, nf);
        Eigen::VectorXd gf(nf);
        for (Eigen::Index i = 0; i < nf; ++i) {
            gf[i] = g[free[i]];
            for (Eigen::Index j = 0; j < nf; ++j) a(i, j) = jtj(free[i], free[j]);
        }
        Eigen::VectorXd diag = a.diagonal();
        const double dmax = diag.maxCoeff();
        if (!(dmax > 0.0)) return finish(Status::Converged);
        diag = diag.cwiseMax(dmax * 1e-30);

        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::MatrixXd damped = a;
            damped.diagonal() += lambda * diag;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            Eigen::VectorXd df;
            if (ldlt.info() == Eigen::Success) df = ldlt.solve(-gf);
            if (df.size() != nf || !df.allFinite()) {
                lambda *= 10.0;
                continue;
            }

            Eigen::VectorXd trial = res.params;
            for (Eigen::Index i = 0; i < nf; ++i) trial[free[i]] += df[i];
            trial = clamp(trial, lo, hi);
            const double step = (trial - res.params).norm();
            const bool small = step <= options.step_tolerance * (res.params.norm() + options.step_tolerance);

            model(trial, trial_r, nullptr);
            const double trial_cost = all_finite(trial_r) ? 0.5 * trial_r.squaredNorm() : kInf;
            if (trial_cost <= res.cost) {
                res.params = trial;
                model(res.params, res.residuals, &res.jacobian);
                res.cost = 0.5 * res.residuals.squaredNorm();
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                if (small) return finish(Status::Converged);
                break;
            }
            if (small) return finish(Status::Converged);
            lambda *= 10.0;
        }
        if (!accepted) return finish(Status::Converged);
    }
    res.iterations = options.max_iterations;
    return finish(Status::MaxIterations);
}

Eigen::MatrixXd covariance(const Result& result, bool scale_by_residual_variance) {
    const Eigen::Index n = result.params.size();
    const Eigen::Index m = result.residuals.size();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool pinned = (i < static_cast<Eigen::Index>(result.at_lower.size()) &&
                             (result.at_lower[static_cast<std::size_t>(i)] ||
                              result.at_upper[static_cast<std::size_t>(i)]));
        if (!pinned) free.push_back(i);
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    if (free.empty()) return cov;

    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd jf(m, nf);
    for (Eigen::Index j = 0; j < nf; ++j) jf.col(j) = result.jacobian.col(free[j]);

    // Column equilibration keeps the pseudo-inverse well conditioned.
    Eigen::VectorXd scale(nf);
    for (Eigen::Index j = 0; j < nf; ++j) {
        const double c = jf.col(j).norm();
        scale[j] = c > 0.0 ? 1.0 / c : 1.0;
    }
    const Eigen::MatrixXd js = jf * scale.asDiagonal();
    const Eigen::MatrixXd inv = (js.transpose() * js).completeOrthogonalDecomposition().pseudoInverse();
    Eigen::MatrixXd covf = scale.asDiagonal() * inv * scale.asDiagonal();

    if (scale_by_residual_variance) {
        const double dof = static_cast<double>(std::max<Eigen::Index>(m - nf, 1));
        covf *= result.residuals.squaredNorm() / dof;
    }
    for (Eigen::Index i = 0; i < nf; ++i) {
        for (Eigen::Index j = 0; j < nf; ++j) cov(free[i], free[j]) = covf(i, j);
    }
    return cov;
}

std::string to_string(Status status) {
    switch (status) {
        case Status::Converged: return "converged";
        case Status::MaxIterations: return "iteration limit reached";
        case Status::NumericalFailure: return "numerical failure";
    }
    return "unknown";
}

}  // namespace qloss::lm
