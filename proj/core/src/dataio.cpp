#include "qloss/dataio.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>

#include "qloss/error.hpp"

namespace qloss::dataio {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        if (i >= s.size()) break;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Splits text into header key/values, comment lines, and content lines.
struct Lines {
    Header header;
    std::vector<std::pair<std::size_t, std::string_view>> content;  // (line number, text)
};

Lines split_lines(const std::string& text, const std::string& name) {
    Lines out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool in_body = false;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string_view line(text.data() + pos, nl - pos);
        ++line_no;
        pos = nl + 1;

        const auto t = trim(line);
        if (t.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        if (t.front() == '#') {
            const auto body = trim(t.substr(1));
            const auto eq = body.find('=');
            if (eq != std::string_view::npos && !in_body) {
                const auto key = trim(body.substr(0, eq));
                const auto value = trim(body.substr(eq + 1));
                if (key.empty()) {
                    throw ParseError(name, line_no, "header line has an empty key");
                }
                if (key.find_first_of(" \t") != std::string_view::npos) {
                    throw ParseError(name, line_no, fmt::format("header key '{}' contains whitespace", key));
                }
                auto [it, inserted] = out.header.emplace(std::string(key), std::string(value));
                if (!inserted) {
                    throw ParseError(name, line_no, fmt::format("duplicate header key '{}'", key));
                }
            }
        } else {
            in_body = true;
            out.content.emplace_back(line_no, t);
        }
        if (nl == text.size()) break;
    }
    return out;
}

std::string take_required(Header& h, const std::string& key, const std::string& name) {
    auto it = h.find(key);
    if (it == h.end() || it->second.empty()) {
        throw ParseError(name, 0, fmt::format("missing header field '#{}='", key));
    }
    std::string v = std::move(it->second);
    h.erase(it);
    return v;
}

double header_number(const std::string& value, const std::string& key, const std::string& name) {
    const auto v = to_double(value);
    if (!v) throw ParseError(name, 0, fmt::format("header field '{}' is not a number: '{}'", key, value));
    return *v;
}

void require_increasing(std::span<const double> x, const std::vector<std::size_t>& lines, const std::string& name,
                        const char* what) {
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) {
            throw ParseError(name, lines.empty() ? 0 : lines[i],
                             fmt::format("{} not strictly increasing at data row {}", what, i + 1));
        }
    }
}

std::string fmt_num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

// ---------------------------------------------------------------------------
// Domain type construction

ComplexSweep::ComplexSweep(std::vector<double> frequency_hz, std::vector<std::complex<double>> s21,
                           SweepMetadata meta)
    : frequency_(std::move(frequency_hz)), s21_(std::move(s21)), meta_(std::move(meta)) {
    if (frequency_.size() != s21_.size()) {
        throw DomainError(fmt::format("sweep has {} frequencies but {} S21 values", frequency_.size(), s21_.size()));
    }
    if (frequency_.size() < kMinPoints) {
        throw DomainError(fmt::format("sweep has {} points, at least {} required", frequency_.size(), kMinPoints));
    }
    for (std::size_t i = 0; i < frequency_.size(); ++i) {
        if (!std::isfinite(frequency_[i]) || !std::isfinite(s21_[i].real()) || !std::isfinite(s21_[i].imag())) {
            throw DomainError(fmt::format("sweep point {} is not finite", i + 1));
        }
        if (i > 0 && !(frequency_[i] > frequency_[i - 1])) {
            throw DomainError(fmt::format("sweep frequency not strictly increasing at point {}", i + 1));
        }
    }
    if (!std::isfinite(meta_.applied_power_dbm)) throw DomainError("applied power must be finite");
    if (!std::isfinite(meta_.line_attenuation_db) || meta_.line_attenuation_db < 0.0) {
        throw DomainError("line attenuation must be finite and non-negative");
    }
}

ComplexSweep ComplexSweep::slice(double f_lo, double f_hi, SweepMetadata meta) const {
    const auto lo = std::lower_bound(frequency_.begin(), frequency_.end(), f_lo);
    const auto hi = std::upper_bound(frequency_.begin(), frequency_.end(), f_hi);
    const auto first = static_cast<std::size_t>(lo - frequency_.begin());
    const auto last = static_cast<std::size_t>(hi - frequency_.begin());
    if (last <= first || last - first < kMinPoints) {
        throw DomainError(fmt::format("window [{:.9g}, {:.9g}] Hz holds {} points, at least {} required", f_lo, f_hi,
                                      last > first ? last - first : 0, kMinPoints));
    }
    return ComplexSweep(std::vector<double>(frequency_.begin() + first, frequency_.begin() + last),
                        std::vector<std::complex<double>>(s21_.begin() + first, s21_.begin() + last), std::move(meta));
}

RtSweep::RtSweep(std::vector<double> temperature_k, std::vector<double> resistance_ohm, Header header)
    : temperature_(std::move(temperature_k)), resistance_(std::move(resistance_ohm)), header_(std::move(header)) {
    if (temperature_.size() != resistance_.size()) throw DomainError("R(T) sweep column lengths differ");
    if (temperature_.size() < kMinPoints) {
        throw DomainError(fmt::format("R(T) sweep has {} points, at least {} required", temperature_.size(), kMinPoints));
    }
    for (std::size_t i = 0; i < temperature_.size(); ++i) {
        if (!(temperature_[i] > 0.0) || !std::isfinite(temperature_[i])) {
            throw DomainError(fmt::format("R(T) temperature at point {} must be positive", i + 1));
        }
        if (!(resistance_[i] >= 0.0) || !std::isfinite(resistance_[i])) {
            throw DomainError(fmt::format("R(T) resistance at point {} must be non-negative", i + 1));
        }
        if (i > 0 && !(temperature_[i] > temperature_[i - 1])) {
            throw DomainError(fmt::format("R(T) temperature not strictly increasing at point {}", i + 1));
        }
    }
}

XrdScan::XrdScan(std::vector<double> two_theta_deg, std::vector<double> counts, Header header)
    : two_theta_(std::move(two_theta_deg)), counts_(std::move(counts)), header_(std::move(header)) {
    if (two_theta_.size() != counts_.size()) throw DomainError("XRD scan column lengths differ");
    if (two_theta_.size() < 2) throw DomainError("XRD scan needs at least 2 points");
    for (std::size_t i = 0; i < two_theta_.size(); ++i) {
        if (!(two_theta_[i] >= kMinTwoTheta && two_theta_[i] <= kMaxTwoTheta)) {
            throw DomainError(fmt::format("XRD 2theta {} at point {} outside [{}, {}] deg", two_theta_[i], i + 1,
                                          kMinTwoTheta, kMaxTwoTheta));
        }
        if (!(counts_[i] >= 0.0) || !std::isfinite(counts_[i])) {
            throw DomainError(fmt::format("XRD counts at point {} must be non-negative", i + 1));
        }
        if (i > 0 && !(two_theta_[i] > two_theta_[i - 1])) {
            throw DomainError(fmt::format("XRD 2theta not strictly increasing at point {}", i + 1));
        }
    }
}

void validate(const SheetMap& map) {
    if (map.r_square.size() != SheetMap::kSites || map.sites.size() != SheetMap::kSites) {
        throw DomainError(fmt::format("wafer '{}': expected {} sites, got {}", map.wafer_id, SheetMap::kSites,
                                      map.r_square.size()));
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < SheetMap::kSites; ++i) {
        if (!(map.r_square[i] > 0.0) || !std::isfinite(map.r_square[i])) {
            throw DomainError(fmt::format("wafer '{}': sheet resistance at site '{}' must be positive", map.wafer_id,
                                          map.sites[i]));
        }
        if (!seen.insert(map.sites[i]).second) {
            throw DomainError(fmt::format("wafer '{}': duplicate site '{}'", map.wafer_id, map.sites[i]));
        }
    }
}

// ---------------------------------------------------------------------------
// Generic columnar files

std::size_t ColumnFile::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ParseError(path, 0, fmt::format("missing column '{}'", name));
    return static_cast<std::size_t>(it - columns.begin());
}

double ColumnFile::number(std::size_t row, std::size_t col) const {
    const auto v = to_double(rows.at(row).at(col));
    if (!v) {
        throw ParseError(path, row_lines.at(row),
                         fmt::format("column '{}' value '{}' is not a finite number", columns.at(col), rows[row][col]));
    }
    return *v;
}

ColumnFile parse_column_text(const std::string& text, const std::string& name) {
    auto lines = split_lines(text, name);
    if (lines.content.empty()) throw ParseError(name, 0, "file has no column-name line");

    ColumnFile out;
    out.path = name;
    out.header = std::move(lines.header);
    for (auto tok : split_ws(lines.content.front().second)) out.columns.emplace_back(tok);
    for (std::size_t i = 0; i < out.columns.size(); ++i) {
        if (to_double(out.columns[i])) {
            throw ParseError(name, lines.content.front().first,
                             "expected a line of column names before the data, found numbers");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (out.columns[i] == out.columns[j]) {
                throw ParseError(name, lines.content.front().first,
                                 fmt::format("duplicate column '{}'", out.columns[i]));
            }
        }
    }
    for (std::size_t k = 1; k < lines.content.size(); ++k) {
        const auto [line_no, body] = lines.content[k];
        const auto toks = split_ws(body);
        if (toks.size() != out.columns.size()) {
            throw ParseError(name, line_no,
                             fmt::format("expected {} columns, found {}", out.columns.size(), toks.size()));
        }
        std::vector<std::string> row;
        row.reserve(toks.size());
        for (auto t : toks) row.emplace_back(t);
        out.rows.push_back(std::move(row));
        out.row_lines.push_back(line_no);
    }
    return out;
}

ColumnFile parse_column_file(const std::filesystem::path& path) {
    return parse_column_text(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Sweep files

ComplexSweep parse_sweep_text(const std::string& text, const std::string& name) {
    auto lines = split_lines(text, name);
    Header h = std::move(lines.header);

    SweepMetadata meta;
    meta.source = name;
    meta.applied_power_dbm = header_number(take_required(h, "power_dbm", name), "power_dbm", name);
    meta.line_attenuation_db = header_number(take_required(h, "attenuation_db", name), "attenuation_db", name);
    if (meta.line_attenuation_db < 0.0) throw ParseError(name, 0, "attenuation_db must be non-negative");
    meta.resonator_id = take_required(h, "resonator_id", name);
    meta.chip_id = take_required(h, "chip_id", name);
    const std::string format_text = take_required(h, "format", name);
    SweepFormat format;
    if (format_text == "complex") {
        format = SweepFormat::Complex;
    } else if (format_text == "db_phase") {
        format = SweepFormat::DbPhase;
    } else {
        throw ParseError(name, 0, fmt::format("unknown format '{}', expected complex or db_phase", format_text));
    }
    if (auto it = h.find("process"); it != h.end()) {
        try {
            meta.process = parse_process_key(it->second);
        } catch (const DomainError& e) {
            throw ParseError(name, 0, e.what());
        }
        h.erase(it);
    }
    if (auto it = h.find("temperature_k"); it != h.end()) {
        meta.temperature_k = header_number(it->second, "temperature_k", name);
        h.erase(it);
    }
    meta.extra = std::move(h);

    std::vector<double> freq;
    std::vector<std::complex<double>> s21;
    std::vector<std::size_t> row_lines;
    freq.reserve(lines.content.size());
    s21.reserve(lines.content.size());
    for (const auto& [line_no, body] : lines.content) {
        const auto toks = split_ws(body);
        if (toks.size() != 3) {
            throw ParseError(name, line_no, fmt::format("expected 3 columns, found {}", toks.size()));
        }
        double v[3];
        for (int c = 0; c < 3; ++c) {
            const auto parsed = to_double(toks[c]);
            if (!parsed) {
                throw ParseError(name, line_no, fmt::format("unparseable value '{}' in column {}", toks[c], c + 1));
            }
            v[c] = *parsed;
        }
        freq.push_back(v[0]);
        if (format == SweepFormat::Complex) {
            s21.emplace_back(v[1], v[2]);
        } else {
            s21.push_back(std::polar(std::pow(10.0, v[1] / 20.0), v[2]));
        }
        row_lines.push_back(line_no);
    }
    require_increasing(freq, row_lines, name, "frequency");
    if (freq.size() < ComplexSweep::kMinPoints) {
        throw ParseError(name, 0,
                         fmt::format("sweep has {} rows, at least {} required", freq.size(), ComplexSweep::kMinPoints));
    }
    try {
        return ComplexSweep(std::move(freq), std::move(s21), std::move(meta));
    } catch (const DomainError& e) {
        throw ParseError(name, 0, e.what());
    }
}

ComplexSweep parse_sweep_file(const std::filesystem::path& path) {
    return parse_sweep_text(read_text_file(path), path.string());
}

std::string format_sweep(const ComplexSweep& sweep, SweepFormat format) {
    const auto& m = sweep.meta();
    std::string out;
    out += fmt::format("#power_dbm={}\n", fmt_num(m.applied_power_dbm));
    out += fmt::format("#attenuation_db={}\n", fmt_num(m.line_attenuation_db));
    out += fmt::format("#resonator_id={}\n", m.resonator_id);
    out += fmt::format("#chip_id={}\n", m.chip_id);
    if (m.process) out += fmt::format("#process={}\n", to_string(*m.process));
    if (m.temperature_k) out += fmt::format("#temperature_k={}\n", fmt_num(*m.temperature_k));
    out += fmt::format("#format={}\n", format == SweepFormat::Complex ? "complex" : "db_phase");
    for (const auto& [k, v] : m.extra) out += fmt::format("#{}={}\n", k, v);
    out += format == SweepFormat::Complex ? "# frequency_hz s21_real s21_imag\n"
                                          : "# frequency_hz s21_mag_db s21_phase_rad\n";
    const auto f = sweep.frequency();
    const auto s = sweep.s21();
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (format == SweepFormat::Complex) {
            out += fmt::format("{} {} {}\n", fmt_num(f[i]), fmt_num(s[i].real()), fmt_num(s[i].imag()));
        } else {
            out += fmt::format("{} {} {}\n", fmt_num(f[i]), fmt_num(20.0 * std::log10(std::abs(s[i]))),
                               fmt_num(std::arg(s[i])));
        }
    }
    return out;
}

void write_sweep_file(const ComplexSweep& sweep, const std::filesystem::path& path, SweepFormat format) {
    write_text_file(path, format_sweep(sweep, format));
}

// ---------------------------------------------------------------------------
// R(T), XRD and sheet-resistance files

RtSweep parse_rt_text(const std::string& text, const std::string& name) {
    const auto file = parse_column_text(text, name);
    const auto ct = file.column("temperature_k");
    const auto cr = file.column("resistance_ohm");
    std::vector<double> t;
    std::vector<double> r;
    for (std::size_t i = 0; i < file.rows.size(); ++i) {
        t.push_back(file.number(i, ct));
        r.push_back(file.number(i, cr));
        if (r.back() < 0.0) throw ParseError(name, file.row_lines[i], "resistance must be non-negative");
    }
    require_increasing(t, file.row_lines, name, "temperature");
    if (t.size() < RtSweep::kMinPoints) {
        throw ParseError(name, 0, fmt::format("R(T) file has {} rows, at least {} required", t.size(),
                                              RtSweep::kMinPoints));
    }
    try {
        return RtSweep(std::move(t), std::move(r), file.header);
    } catch (const DomainError& e) {
        throw ParseError(name, 0, e.what());
    }
}

RtSweep parse_rt_file(const std::filesystem::path& path) { return parse_rt_text(read_text_file(path), path.string()); }

XrdScan parse_xrd_text(const std::string& text, const std::string& name) {
    const auto file = parse_column_text(text, name);
    const auto ca = file.column("two_theta_deg");
    const auto cc = file.column("counts");
    std::vector<double> a;
    std::vector<double> c;
    for (std::size_t i = 0; i < file.rows.size(); ++i) {
        a.push_back(file.number(i, ca));
        c.push_back(file.number(i, cc));
        if (a.back() < XrdScan::kMinTwoTheta || a.back() > XrdScan::kMaxTwoTheta) {
            throw ParseError(name, file.row_lines[i], "2theta outside [10, 120] deg");
        }
        if (c.back() < 0.0) throw ParseError(name, file.row_lines[i], "counts must be non-negative");
    }
    require_increasing(a, file.row_lines, name, "2theta");
    try {
        return XrdScan(std::move(a), std::move(c), file.header);
    } catch (const DomainError& e) {
        throw ParseError(name, 0, e.what());
    }
}

XrdScan parse_xrd_file(const std::filesystem::path& path) {
    return parse_xrd_text(read_text_file(path), path.string());
}

std::vector<SheetMap> parse_sheet_text(const std::string& text, const std::string& name) {
    const auto file = parse_column_text(text, name);
    const auto cw = file.column("wafer_id");
    const auto cs = file.column("site");
    const auto cr = file.column("r_square_ohm_sq");
    const auto cb = file.column("batch_id");
    const auto cd = file.column("depo");

    std::vector<SheetMap> maps;
    std::vector<std::size_t> first_line;
    for (std::size_t i = 0; i < file.rows.size(); ++i) {
        const auto& row = file.rows[i];
        auto it = std::find_if(maps.begin(), maps.end(), [&](const SheetMap& m) { return m.wafer_id == row[cw]; });
        if (it == maps.end()) {
            maps.push_back(SheetMap{row[cw], {}, {}, row[cb], row[cd]});
            first_line.push_back(file.row_lines[i]);
            it = maps.end() - 1;
        } else if (it->batch_id != row[cb] || it->depo_key != row[cd]) {
            throw ParseError(name, file.row_lines[i],
                             fmt::format("wafer '{}' changes batch or deposition between rows", row[cw]));
        }
        const double r = file.number(i, cr);
        if (!(r > 0.0)) throw ParseError(name, file.row_lines[i], "sheet resistance must be positive");
        it->sites.push_back(row[cs]);
        it->r_square.push_back(r);
    }
    if (maps.empty()) throw ParseError(name, 0, "sheet file has no readings");
    for (std::size_t w = 0; w < maps.size(); ++w) {
        try {
            validate(maps[w]);
        } catch (const DomainError& e) {
            throw ParseError(name, first_line[w], e.what());
        }
    }
    return maps;
}

std::vector<SheetMap> parse_sheet_file(const std::filesystem::path& path) {
    return parse_sheet_text(read_text_file(path), path.string());
}

namespace {

std::string format_header(const Header& h) {
    std::string out;
    for (const auto& [k, v] : h) out += fmt::format("#{}={}\n", k, v);
    return out;
}

}  // namespace

void write_rt_file(const RtSweep& sweep, const std::filesystem::path& path) {
    std::string out = format_header(sweep.header());
    out += "temperature_k resistance_ohm\n";
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        out += fmt::format("{} {}\n", fmt_num(sweep.temperature()[i]), fmt_num(sweep.resistance()[i]));
    }
    write_text_file(path, out);
}

void write_xrd_file(const XrdScan& scan, const std::filesystem::path& path) {
    std::string out = format_header(scan.header());
    out += "two_theta_deg counts\n";
    for (std::size_t i = 0; i < scan.size(); ++i) {
        out += fmt::format("{} {}\n", fmt_num(scan.two_theta()[i]), fmt_num(scan.counts()[i]));
    }
    write_text_file(path, out);
}

void write_sheet_file(const std::vector<SheetMap>& maps, const std::filesystem::path& path) {
    std::string out = "wafer_id site r_square_ohm_sq batch_id depo\n";
    for (const auto& m : maps) {
        validate(m);
        for (std::size_t i = 0; i < m.sites.size(); ++i) {
            out += fmt::format("{} {} {} {} {}\n", m.wafer_id, m.sites[i], fmt_num(m.r_square[i]), m.batch_id,
                               m.depo_key);
        }
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError(fmt::format("cannot create directory '{}': {}", path.parent_path().string(), ec.message()));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    out << text;
    out.flush();
    if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace qloss::dataio
