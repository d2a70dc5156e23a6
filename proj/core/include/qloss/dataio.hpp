#pragma once

// On-disk measurement formats and the validated domain types they parse into.
//
// All files are plain text. A file may open with a header block of
// `#key=value` lines; other `#` lines are comments. Sweep files carry their
// metadata in the header block and whitespace-separated numeric columns in the
// body. The remaining formats have a single line of column names after the
// (optional) header block.

#include <complex>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qloss/process.hpp"

namespace qloss::dataio {

using Header = std::map<std::string, std::string>;

enum class SweepFormat { Complex, DbPhase };

struct SweepMetadata {
    double applied_power_dbm = 0.0;   // at the VNA output
    double line_attenuation_db = 0.0; // total chain to the chip, >= 0
    std::optional<double> temperature_k;
    std::string resonator_id;
    std::string chip_id;
    std::optional<ProcessKey> process;
    Header extra;        // unknown header keys, echoed into reports
    std::string source;  // file the sweep came from, empty for in-memory data
};

// One S21 trace at a fixed applied power. Immutable once constructed.
class ComplexSweep {
public:
    static constexpr std::size_t kMinPoints = 32;

    // Throws DomainError unless frequency is strictly increasing, has at least
    // kMinPoints entries and matches s21 in length, and the metadata is sane.
    ComplexSweep(std::vector<double> frequency_hz, std::vector<std::complex<double>> s21, SweepMetadata meta);

    std::span<const double> frequency() const noexcept { return frequency_; }
    std::span<const std::complex<double>> s21() const noexcept { return s21_; }
    const SweepMetadata& meta() const noexcept { return meta_; }
    std::size_t size() const noexcept { return frequency_.size(); }

    // Copy of the points with frequency in [f_lo, f_hi]. Throws DomainError if
    // fewer than kMinPoints remain.
    ComplexSweep slice(double f_lo, double f_hi, SweepMetadata meta) const;

private:
    std::vector<double> frequency_;
    std::vector<std::complex<double>> s21_;
    SweepMetadata meta_;
};

// Resistance versus temperature from a DC cooldown.
class RtSweep {
public:
    static constexpr std::size_t kMinPoints = 8;

    RtSweep(std::vector<double> temperature_k, std::vector<double> resistance_ohm, Header header = {});

    std::span<const double> temperature() const noexcept { return temperature_; }
    std::span<const double> resistance() const noexcept { return resistance_; }
    const Header& header() const noexcept { return header_; }
    std::size_t size() const noexcept { return temperature_.size(); }

private:
    std::vector<double> temperature_;
    std::vector<double> resistance_;
    Header header_;
};

// 2theta/omega diffraction scan; angles in degrees.
class XrdScan {
public:
    static constexpr double kMinTwoTheta = 10.0;
    static constexpr double kMaxTwoTheta = 120.0;

    XrdScan(std::vector<double> two_theta_deg, std::vector<double> counts, Header header = {});

    std::span<const double> two_theta() const noexcept { return two_theta_; }
    std::span<const double> counts() const noexcept { return counts_; }
    const Header& header() const noexcept { return header_; }
    std::size_t size() const noexcept { return two_theta_.size(); }

private:
    std::vector<double> two_theta_;
    std::vector<double> counts_;
    Header header_;
};

// Four-point-probe readings of one wafer.
struct SheetMap {
    static constexpr std::size_t kSites = 9;

    std::string wafer_id;
    std::vector<std::string> sites;  // kSites labels
    std::vector<double> r_square;    // ohm/sq, one per site
    std::string batch_id;
    std::string depo_key;
};

// Throws DomainError when the map does not hold exactly nine positive readings.
void validate(const SheetMap& map);

// Generic columnar file: header block, one line of column names, rows.
struct ColumnFile {
    std::string path;
    Header header;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;  // 1-based file line of each row

    // Index of a column by name; throws ParseError naming the file if absent.
    std::size_t column(const std::string& name) const;
    // Numeric cell; throws ParseError with the row's line number.
    double number(std::size_t row, std::size_t col) const;
};

ColumnFile parse_column_text(const std::string& text, const std::string& name);
ColumnFile parse_column_file(const std::filesystem::path& path);

ComplexSweep parse_sweep_text(const std::string& text, const std::string& name);
ComplexSweep parse_sweep_file(const std::filesystem::path& path);

RtSweep parse_rt_text(const std::string& text, const std::string& name);
RtSweep parse_rt_file(const std::filesystem::path& path);

XrdScan parse_xrd_text(const std::string& text, const std::string& name);
XrdScan parse_xrd_file(const std::filesystem::path& path);

std::vector<SheetMap> parse_sheet_text(const std::string& text, const std::string& name);
std::vector<SheetMap> parse_sheet_file(const std::filesystem::path& path);

// Writers emit the formats above with round-trip (17 significant digit)
// precision so that regenerated files parse back bit-identically.
std::string format_sweep(const ComplexSweep& sweep, SweepFormat format = SweepFormat::Complex);
void write_sweep_file(const ComplexSweep& sweep, const std::filesystem::path& path,
                      SweepFormat format = SweepFormat::Complex);
void write_rt_file(const RtSweep& sweep, const std::filesystem::path& path);
void write_xrd_file(const XrdScan& scan, const std::filesystem::path& path);
void write_sheet_file(const std::vector<SheetMap>& maps, const std::filesystem::path& path);

// Reads a whole file into memory; throws IoError.
std::string read_text_file(const std::filesystem::path& path);
// Writes (creating parent directories); throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace qloss::dataio
