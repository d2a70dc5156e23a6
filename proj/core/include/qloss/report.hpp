#pragma once

// Machine-readable analysis reports (JSON) and columnar plot-data files.
//
// Every numeric result is stored as {"value", "unit", "sigma"}; NaN and
// infinities become null. Object keys keep insertion order and no timestamps
// are written, so reports are reproducible byte for byte.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qloss/circlefit.hpp"
#include "qloss/dataio.hpp"
#include "qloss/filmchar.hpp"
#include "qloss/lossbudget.hpp"
#include "qloss/stats.hpp"
#include "qloss/tlsloss.hpp"

namespace qloss::report {

using Json = nlohmann::ordered_json;

std::string version();

Json quantity(double value, std::string_view unit, std::optional<double> sigma = std::nullopt);
// Value of a quantity object (or plain number); null reads as NaN. Throws
// DomainError for anything else.
double value_of(const Json& q);
double sigma_of(const Json& q);

// Chip design constants carried into every report.
Json design_constants();

// New report skeleton of the given kind.
Json make_report(std::string_view kind);

Json provenance(const dataio::SweepMetadata& meta);

Json to_json(const circlefit::ResonanceFit& fit);
circlefit::ResonanceFit resonance_fit_from_json(const Json& j);

Json to_json(const tlsloss::TlsFit& fit);
tlsloss::TlsFit tls_fit_from_json(const Json& j);

Json to_json(const tlsloss::LossPoint& p);
tlsloss::LossPoint loss_point_from_json(const Json& j);

Json to_json(const stats::BoxSummary& b);
stats::BoxSummary box_summary_from_json(const Json& j);

Json to_json(const lossbudget::ParticipationRow& p);
Json to_json(const lossbudget::InterfaceLosses& d, const lossbudget::InterfaceLosses* sigma = nullptr);
Json to_json(const lossbudget::Decomposition& d);

Json to_json(const filmchar::PeakFit& p);
filmchar::PeakFit peak_fit_from_json(const Json& j);
Json to_json(const filmchar::OrientationResult& o);
Json to_json(const filmchar::SheetStats& s);
Json to_json(const filmchar::TcResult& t);
filmchar::TcResult tc_result_from_json(const Json& j);

std::string dump(const Json& j);
void write_report(const Json& j, const std::filesystem::path& path);
Json read_report(const std::filesystem::path& path);

// Columns of numbers, one point per line, with an optional `#key=value`
// header block so the files parse back with dataio::parse_column_file.
struct PlotData {
    dataio::Header header;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

std::string format_plot_data(const PlotData& data);
void write_plot_data(const PlotData& data, const std::filesystem::path& path);

}  // namespace qloss::report
