#pragma once

// qloss command-line application. `run` parses arguments and dispatches to
// the subcommands; it never calls exit() so it can be driven from tests.

#include <ostream>
#include <string>
#include <vector>

#include "common.hpp"

namespace qloss::app {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ScanArgs {
    std::string input;
    double prominence_db = 3.0;
};
int cmd_scan(Context& ctx, const ScanArgs& a);

struct FitArgs {
    std::vector<std::string> inputs;
};
int cmd_fit(Context& ctx, const FitArgs& a);

struct PowerArgs {
    std::vector<std::string> inputs;
    std::size_t curve_points = 200;
};
int cmd_power(Context& ctx, const PowerArgs& a);

struct BudgetArgs {
    std::string table;          // empty: built-in table
    std::string losses;         // file with delta_sa delta_ma delta_ms delta_si
    std::vector<double> delta;  // same four values from the command line
    std::string observations;   // decomposition input
};
int cmd_budget(Context& ctx, const BudgetArgs& a);

struct XrdArgs {
    std::vector<std::string> inputs;
};
int cmd_xrd(Context& ctx, const XrdArgs& a);

struct RrrArgs {
    std::vector<std::string> inputs;
};
int cmd_rrr(Context& ctx, const RrrArgs& a);

struct SheetArgs {
    std::vector<std::string> inputs;
    std::optional<double> thickness_nm;
};
int cmd_sheet(Context& ctx, const SheetArgs& a);

struct ReportArgs {
    std::vector<std::string> inputs;
};
int cmd_report(Context& ctx, const ReportArgs& a);

struct SynthArgs {
    std::string kind;
    // notch / power series
    double fr = 6e9;
    double ql = 5e4;
    double qc = 1e5;
    double phi = 0.0;
    double a = 1.0;
    double alpha = 0.0;
    double tau = 0.0;
    double noise = 0.0;
    std::size_t points = 1001;
    double span_linewidths = 10.0;
    double power_dbm = -100.0;
    double delta_tls = 2e-6;
    double delta_hp = 1e-6;
    double n_c = 10.0;
    double beta = 0.5;
    std::size_t powers = 12;
    std::string resonator_id = "R1";
    std::string chip_id;
    std::string process;
    // feedline
    std::size_t resonators = 9;
    double f_first = 5.6e9;
    double spacing = 200e6;
    std::vector<double> frequencies;  // explicit resonance list overrides f_first/spacing
    // rt
    double tc = 4.7;
    double width = 0.2;
    double r_normal = 25.0;
    double rrr = 4.0;
    // xrd
    std::vector<double> centers{36.9};
    std::vector<double> fwhms{0.4};
    std::vector<double> amplitudes{1000.0};
    std::vector<double> etas{0.5};
    double two_theta_lo = 30.0;
    double two_theta_hi = 50.0;
    double step = 0.01;
    double background = 20.0;
};
int cmd_synth(Context& ctx, const SynthArgs& a);

}  // namespace qloss::app
