#pragma once

// Resonance search on a wideband feedline trace.

#include <filesystem>
#include <string>
#include <vector>

#include "qloss/dataio.hpp"

namespace qloss::app {

struct ScanOptions {
    double prominence_db = 3.0;        // dip depth below the local baseline
    double baseline_window_hz = 20e6;  // moving-median width
    double window_fwhm = 5.0;          // half-width of each emitted window, in FWHM
    double proximity_hz = 50e6;        // closer neighbours get flagged
};

struct Candidate {
    std::string label;  // R1, R2, ... in frequency order
    double frequency = 0.0;
    double depth_db = 0.0;
    double fwhm = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool proximity = false;
};

// Throws FitError when no dip clears the prominence threshold.
std::vector<Candidate> scan_dips(const dataio::ComplexSweep& sweep, const ScanOptions& options = {});

// Window files are columnar: label f_center_hz f_lo_hz f_hi_hz fwhm_hz depth_db proximity.
void write_windows_file(const std::vector<Candidate>& c, const std::filesystem::path& path);
std::vector<Candidate> parse_windows_file(const std::filesystem::path& path);

}  // namespace qloss::app
