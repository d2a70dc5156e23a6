#pragma once

// Participation-ratio loss budget.
//
// The TLS loss of a resonator is the sum of the interface loss tangents
// weighted by the share of electric energy stored in each region:
//
//   delta_TLS = p_MA delta_MA + p_MS delta_MS + p_SA delta_SA + p_Si delta_Si

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace qloss::lossbudget {

struct ParticipationRow {
    double trench_depth_nm = 0.0;
    double p_sa = 0.0;  // substrate-air
    double p_ma = 0.0;  // metal-air
    double p_ms = 0.0;  // metal-substrate
    double p_si = 0.0;  // bulk silicon
};

// Rows sorted by trench depth. The interface-layer thickness the ratios were
// simulated with is carried along for reports; it is not a fit parameter.
struct ParticipationTable {
    std::vector<ParticipationRow> rows;
    double layer_thickness_nm = 2.0;
    double conductor_width_um = 10.0;
    double gap_um = 6.0;
    std::string source;
};

struct InterfaceLosses {
    double delta_sa = 0.0;
    double delta_ma = 0.0;
    double delta_ms = 0.0;
    double delta_si = 0.0;
};

// Component order used by the array views below.
enum class Interface { SA = 0, MA = 1, MS = 2, Si = 3 };
inline constexpr std::size_t kInterfaces = 4;
std::string to_string(Interface i);

std::array<double, kInterfaces> as_array(const ParticipationRow& p);
std::array<double, kInterfaces> as_array(const InterfaceLosses& d);
InterfaceLosses losses_from_array(const std::array<double, kInterfaces>& v);

// Throws DomainError unless every ratio is non-negative, p_si <= 1 and the
// ratios sum to at most 1.
void validate(const ParticipationRow& p);

// Simulated ratios for the 10 um / 6 um CPW at 0, 50 and 100 nm trench depth.
const ParticipationTable& builtin_table();
inline const ParticipationTable& load_builtin_table() { return builtin_table(); }

// Columnar table with columns trench_nm p_sa p_ma p_ms p_si and an optional
// `#layer_thickness_nm=` header. Throws ParseError.
ParticipationTable parse_table_text(const std::string& text, const std::string& name);
ParticipationTable parse_table_file(const std::filesystem::path& path);

// Piecewise-linear per column; exact at tabulated depths. Throws DomainError
// outside [min, max] depth.
ParticipationRow interpolate(const ParticipationTable& table, double trench_depth_nm);

double forward_loss(const ParticipationRow& p, const InterfaceLosses& d);

struct Observation {
    ParticipationRow participation;
    double delta_tls = 0.0;
    double sigma = 0.0;  // <= 0 on every row means unweighted
};

struct Decomposition {
    // Unresolved components hold NaN in both losses and sigma.
    InterfaceLosses losses;
    InterfaceLosses sigma;
    std::array<bool, kInterfaces> unresolved{};
    std::size_t rank = 0;
    double condition_number = 0.0;           // full equilibrated matrix, inf if rank deficient
    double resolved_condition_number = 0.0;  // columns actually solved for
    double rms_residual = 0.0;               // weighted
};

inline constexpr std::size_t kMinObservations = 4;
inline constexpr double kMaxCondition = 1e12;

// Non-negative weighted least squares for the four loss tangents. When the
// participation vectors do not span all four directions, the columns that
// add nothing are flagged unresolved and the loss is attributed to the
// remaining ones. Throws DomainError for fewer than four rows and FitError
// when the resolved system is worse conditioned than 1e12.
Decomposition decompose(std::span<const Observation> observations);

}  // namespace qloss::lossbudget
