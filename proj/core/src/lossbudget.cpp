#include "qloss/lossbudget.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "qloss/dataio.hpp"
#include "qloss/error.hpp"

namespace qloss::lossbudget {

std::string to_string(Interface i) {
    switch (i) {
        case Interface::SA: return "SA";
        case Interface::MA: return "MA";
        case Interface::MS: return "MS";
        case Interface::Si: return "Si";
    }
    return "?";
}

std::array<double, kInterfaces> as_array(const ParticipationRow& p) { return {p.p_sa, p.p_ma, p.p_ms, p.p_si}; }

std::array<double, kInterfaces> as_array(const InterfaceLosses& d) {
    return {d.delta_sa, d.delta_ma, d.delta_ms, d.delta_si};
}

InterfaceLosses losses_from_array(const std::array<double, kInterfaces>& v) { return {v[0], v[1], v[2], v[3]}; }

void validate(const ParticipationRow& p) {
    const auto v = as_array(p);
    for (double x : v) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw DomainError(fmt::format("participation ratios must be non-negative (trench {} nm)", p.trench_depth_nm));
        }
    }
    if (p.p_si > 1.0) throw DomainError("p_si exceeds 1");
    if (v[0] + v[1] + v[2] + v[3] > 1.0 + 1e-12) throw DomainError("participation ratios sum to more than 1");
    if (!(p.trench_depth_nm >= 0.0)) throw DomainError("trench depth must be non-negative");
}

const ParticipationTable& builtin_table() {
    static const ParticipationTable table{
        {
            {0.0, 2.83e-4, 4.95e-5, 5.93e-4, 0.907},
            {50.0, 2.67e-4, 2.08e-5, 5.45e-4, 0.905},
            {100.0, 2.51e-4, 1.77e-5, 5.04e-4, 0.903},
        },
        2.0,
        10.0,
        6.0,
        "builtin",
    };
    return table;
}

ParticipationTable parse_table_text(const std::string& text, const std::string& name) {
    const auto file = dataio::parse_column_text(text, name);
    const std::size_t c_depth = file.column("trench_nm");
    const std::size_t c_sa = file.column("p_sa");
    const std::size_t c_ma = file.column("p_ma");
    const std::size_t c_ms = file.column("p_ms");
    const std::size_t c_si = file.column("p_si");

    ParticipationTable table;
    table.source = name;
    if (auto it = file.header.find("layer_thickness_nm"); it != file.header.end()) {
        try {
            table.layer_thickness_nm = std::stod(it->second);
        } catch (const std::exception&) {
            throw ParseError(name, 0, "layer_thickness_nm is not a number");
        }
    }
    if (file.rows.empty()) throw ParseError(name, 0, "participation table has no rows");
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        ParticipationRow row{file.number(r, c_depth), file.number(r, c_sa), file.number(r, c_ma),
                             file.number(r, c_ms), file.number(r, c_si)};
        try {
            validate(row);
        } catch (const DomainError& e) {
            throw ParseError(name, file.row_lines[r], e.what());
        }
        if (!table.rows.empty() && !(row.trench_depth_nm > table.rows.back().trench_depth_nm)) {
            throw ParseError(name, file.row_lines[r], "trench depth not strictly increasing");
        }
        table.rows.push_back(row);
    }
    return table;
}

ParticipationTable parse_table_file(const std::filesystem::path& path) {
    return parse_table_text(dataio::read_text_file(path), path.string());
}

ParticipationRow interpolate(const ParticipationTable& table, double depth) {
    const auto& rows = table.rows;
    if (rows.empty()) throw DomainError("participation table is empty");
    if (!(depth >= rows.front().trench_depth_nm && depth <= rows.back().trench_depth_nm)) {
        throw DomainError(fmt::format("trench depth {} nm outside table range [{}, {}] nm", depth,
                                      rows.front().trench_depth_nm, rows.back().trench_depth_nm));
    }
    const auto hi = std::lower_bound(rows.begin(), rows.end(), depth,
                                     [](const ParticipationRow& r, double d) { return r.trench_depth_nm < d; });
    if (hi->trench_depth_nm == depth) return *hi;
    const auto lo = hi - 1;
    const double t = (depth - lo->trench_depth_nm) / (hi->trench_depth_nm - lo->trench_depth_nm);
    const auto lerp = [t](double a, double b) { return a + t * (b - a); };
    return {depth, lerp(lo->p_sa, hi->p_sa), lerp(lo->p_ma, hi->p_ma), lerp(lo->p_ms, hi->p_ms),
            lerp(lo->p_si, hi->p_si)};
}

double forward_loss(const ParticipationRow& p, const InterfaceLosses& d) {
    return p.p_ma * d.delta_ma + p.p_ms * d.delta_ms + p.p_sa * d.delta_sa + p.p_si * d.delta_si;
}

namespace {

// Lawson-Hanson active-set solver for min ||Ax - b|| subject to x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const Eigen::Index n = A.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(A.rows(), n)) *
                       A.norm() * std::max(b.norm(), 1e-300);

    const auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
        const Eigen::VectorXd sp = Ap.colPivHouseholderQr().solve(b);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = sp[static_cast<Eigen::Index>(k)];
        return s;
    };

    for (int outer = 0; outer < 3 * static_cast<int>(n) + 3; ++outer) {
        const Eigen::VectorXd w = A.transpose() * (b - A * x);
        Eigen::Index t = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
                wmax = w[j];
                t = j;
            }
        }
        if (t < 0) break;
        passive[static_cast<std::size_t>(t)] = true;

        for (int inner = 0; inner < 3 * static_cast<int>(n) + 3; ++inner) {
            const Eigen::VectorXd s = solve_passive();
            bool feasible = true;
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, x[j] / (x[j] - s[j]));
                }
            }
            if (feasible) {
                x = s;
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x[j] <= 0.0) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    return x;
}

double condition_of(const Eigen::MatrixXd& A) {
    if (A.cols() == 0) return 0.0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    const double smin = sv[sv.size() - 1];
    return smin > 0.0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
}

}  // namespace

Decomposition decompose(std::span<const Observation> obs) {
    if (obs.size() < kMinObservations) {
        throw DomainError(fmt::format("decompose needs at least {} rows, got {}", kMinObservations, obs.size()));
    }
    const auto m = static_cast<Eigen::Index>(obs.size());
    constexpr auto n = static_cast<Eigen::Index>(kInterfaces);

    const bool weighted =
        std::all_of(obs.begin(), obs.end(), [](const Observation& o) { return o.sigma > 0.0 && std::isfinite(o.sigma); });

    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        validate(o.participation);
        if (!std::isfinite(o.delta_tls)) throw DomainError("measured loss must be finite");
        const double w = weighted ? 1.0 / o.sigma : 1.0;
        const auto p = as_array(o.participation);
        for (Eigen::Index j = 0; j < n; ++j) A(i, j) = w * p[static_cast<std::size_t>(j)];
        b[i] = w * o.delta_tls;
    }

    // Equilibrate columns so rank and conditioning do not depend on the very
    // different magnitudes of the bulk and interface ratios.
    Eigen::VectorXd scale(n);
    for (Eigen::Index j = 0; j < n; ++j) scale[j] = A.col(j).norm();
    Eigen::MatrixXd As(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        As.col(j) = scale[j] > 0.0 ? Eigen::VectorXd(A.col(j) / scale[j]) : Eigen::VectorXd::Zero(m);
    }

    Decomposition out;
    out.condition_number = condition_of(As);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
    const auto rank = static_cast<Eigen::Index>(qr.rank());
    out.rank = static_cast<std::size_t>(rank);
    if (rank == 0) throw DomainError("participation matrix is zero");
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < rank; ++k) cols.push_back(qr.colsPermutation().indices()[k]);
    std::sort(cols.begin(), cols.end());

    Eigen::MatrixXd Ar(m, rank);
    for (Eigen::Index k = 0; k < rank; ++k) Ar.col(k) = As.col(cols[static_cast<std::size_t>(k)]);
    out.resolved_condition_number = condition_of(Ar);
    if (out.resolved_condition_number > kMaxCondition) {
        throw FitError(fmt::format("participation matrix condition number {:.3g} exceeds {:.0e}",
                                   out.resolved_condition_number, kMaxCondition));
    }

    const Eigen::VectorXd z = nnls(Ar, b);
    const Eigen::VectorXd resid = Ar * z - b;
    out.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(m));

    const Eigen::MatrixXd cov_z = (Ar.transpose() * Ar).inverse();
    double s2 = 1.0;
    if (!weighted) {
        s2 = m > rank ? resid.squaredNorm() / static_cast<double>(m - rank) : std::numeric_limits<double>::quiet_NaN();
    }

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::array<double, kInterfaces> val{nan, nan, nan, nan};
    std::array<double, kInterfaces> sig{nan, nan, nan, nan};
    out.unresolved.fill(true);
    for (Eigen::Index k = 0; k < rank; ++k) {
        const auto j = static_cast<std::size_t>(cols[static_cast<std::size_t>(k)]);
        const double c = scale[static_cast<Eigen::Index>(j)];
        val[j] = z[k] / c;
        sig[j] = std::sqrt(std::max(cov_z(k, k), 0.0) * s2) / c;
        out.unresolved[j] = false;
    }
    out.losses = losses_from_array(val);
    out.sigma = losses_from_array(sig);
    return out;
}

}  // namespace qloss::lossbudget
