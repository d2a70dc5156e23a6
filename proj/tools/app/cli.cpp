#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <thread>

#include "app.hpp"
#include "qloss/error.hpp"

namespace qloss::app {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qloss: superconducting resonator loss and film analysis"};
    app.name("qloss");
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value file with option defaults (flags take precedence)");

    GlobalOptions g;
    std::string out_dir = g.out.string();
    double attenuation = 0.0;
    double trench = 0.0;
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", g.seed, "Random seed for synthetic data")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads for batch fits (0: all cores)")->capture_default_str();
    auto* att_opt = app.add_option("--attenuation-db", attenuation, "Line attenuation to the chip, overrides file headers");
    auto* trench_opt = app.add_option("--trench-nm", trench, "Trench depth for the loss budget");
    app.add_option("--windows", g.windows, "fit: window file from scan; xrd: 2theta intervals lo:hi,lo:hi");

    ScanArgs scan;
    auto* c_scan = app.add_subcommand("scan", "Find resonance dips on a wideband feedline sweep");
    c_scan->add_option("input", scan.input, "Feedline sweep file")->required()->check(CLI::ExistingFile);
    c_scan->add_option("--prominence-db", scan.prominence_db, "Dip depth threshold below baseline")->capture_default_str();

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Fit notch resonances (whole files or scan windows)");
    c_fit->add_option("inputs", fit.inputs, "Sweep files or directories")->required();

    PowerArgs power;
    auto* c_power = app.add_subcommand("power", "Loss versus photon number and TLS fit per resonator");
    c_power->add_option("inputs", power.inputs, "Sweep files or directories")->required();
    c_power->add_option("--curve-points", power.curve_points, "Samples of the fitted curve")->capture_default_str();

    BudgetArgs budget;
    auto* c_budget = app.add_subcommand("budget", "Participation-ratio loss budget");
    c_budget->add_option("--table", budget.table, "Participation table file (default: built-in)");
    c_budget->add_option("--losses", budget.losses, "File with delta_sa delta_ma delta_ms delta_si");
    c_budget->add_option("--delta", budget.delta, "Loss tangents SA,MA,MS,SI")->delimiter(',')->expected(4);
    c_budget->add_option("--observations", budget.observations, "Measured delta_tls per geometry: decompose");

    XrdArgs xrd;
    auto* c_xrd = app.add_subcommand("xrd", "Pseudo-Voigt peak fits and orientation");
    c_xrd->add_option("inputs", xrd.inputs, "XRD scan files or directories")->required();

    RrrArgs rrr;
    auto* c_rrr = app.add_subcommand("rrr", "Tc and residual resistance ratio");
    c_rrr->add_option("inputs", rrr.inputs, "R(T) files or directories")->required();

    SheetArgs sheet;
    double thickness = 0.0;
    auto* c_sheet = app.add_subcommand("sheet", "Sheet-resistance uniformity per batch");
    c_sheet->add_option("inputs", sheet.inputs, "Sheet-resistance files or directories")->required();
    auto* thick_opt = c_sheet->add_option("--thickness-nm", thickness, "Film thickness for resistivity");

    ReportArgs rep;
    auto* c_report = app.add_subcommand("report", "Group power reports by process variation");
    c_report->add_option("inputs", rep.inputs, "Directories or power_report.json files")->required();

    SynthArgs sy;
    auto* c_synth = app.add_subcommand("synth", "Write synthetic data with a truth sidecar");
    c_synth->add_option("kind", sy.kind, "notch | power_series | feedline | rt | xrd")
        ->required()
        ->check(CLI::IsMember({"notch", "power_series", "feedline", "rt", "xrd"}));
    c_synth->add_option("--fr", sy.fr, "Resonance frequency [Hz]")->capture_default_str();
    c_synth->add_option("--ql", sy.ql, "Loaded Q (notch)")->capture_default_str();
    c_synth->add_option("--qc", sy.qc, "Coupling |Qc|")->capture_default_str();
    c_synth->add_option("--phi", sy.phi, "Mismatch angle [rad]")->capture_default_str();
    c_synth->add_option("--a", sy.a, "Background amplitude")->capture_default_str();
    c_synth->add_option("--alpha", sy.alpha, "Background phase [rad]")->capture_default_str();
    c_synth->add_option("--tau", sy.tau, "Cable delay [s]")->capture_default_str();
    c_synth->add_option("--noise", sy.noise, "Noise sigma per quadrature / ohm / counts")->capture_default_str();
    c_synth->add_option("--points", sy.points, "Points per sweep")->capture_default_str();
    c_synth->add_option("--span-linewidths", sy.span_linewidths, "Sweep span in linewidths")->capture_default_str();
    c_synth->add_option("--power-dbm", sy.power_dbm, "Applied power (notch)")->capture_default_str();
    c_synth->add_option("--delta-tls", sy.delta_tls, "TLS loss amplitude")->capture_default_str();
    c_synth->add_option("--delta-hp", sy.delta_hp, "High-power loss")->capture_default_str();
    c_synth->add_option("--n-c", sy.n_c, "Critical photon number")->capture_default_str();
    c_synth->add_option("--beta", sy.beta, "Saturation exponent")->capture_default_str();
    c_synth->add_option("--powers", sy.powers, "Number of drive powers")->capture_default_str();
    c_synth->add_option("--resonator-id", sy.resonator_id, "Resonator id")->capture_default_str();
    c_synth->add_option("--chip-id", sy.chip_id, "Chip id");
    c_synth->add_option("--process", sy.process, "Process key DEPO/ETCH/STRIP/WET");
    c_synth->add_option("--resonators", sy.resonators, "Resonators on the feedline")->capture_default_str();
    c_synth->add_option("--f-first", sy.f_first, "Lowest feedline resonance [Hz]")->capture_default_str();
    c_synth->add_option("--spacing", sy.spacing, "Feedline resonance spacing [Hz]")->capture_default_str();
    c_synth->add_option("--frequencies", sy.frequencies, "Explicit feedline resonances [Hz]")->delimiter(',');
    c_synth->add_option("--tc", sy.tc, "Critical temperature [K]")->capture_default_str();
    c_synth->add_option("--width", sy.width, "10-90% transition width [K]")->capture_default_str();
    c_synth->add_option("--r-normal", sy.r_normal, "Resistance above Tc [ohm]")->capture_default_str();
    c_synth->add_option("--rrr", sy.rrr, "Residual resistance ratio")->capture_default_str();
    c_synth->add_option("--center", sy.centers, "Peak centres [deg]")->delimiter(',');
    c_synth->add_option("--fwhm", sy.fwhms, "Peak widths [deg]")->delimiter(',');
    c_synth->add_option("--amplitude", sy.amplitudes, "Peak amplitudes [counts]")->delimiter(',');
    c_synth->add_option("--eta", sy.etas, "Lorentzian fractions")->delimiter(',');
    c_synth->add_option("--two-theta-lo", sy.two_theta_lo, "Scan start [deg]")->capture_default_str();
    c_synth->add_option("--two-theta-hi", sy.two_theta_hi, "Scan end [deg]")->capture_default_str();
    c_synth->add_option("--step", sy.step, "Scan step [deg]")->capture_default_str();
    c_synth->add_option("--background", sy.background, "Flat background [counts]")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    g.out = out_dir;
    if (att_opt->count() > 0) g.attenuation_db = attenuation;
    if (trench_opt->count() > 0) g.trench_nm = trench;
    if (g.jobs == 0) g.jobs = std::max(1u, std::thread::hardware_concurrency());
    if (thick_opt->count() > 0) sheet.thickness_nm = thickness;

    Context ctx{g, out, err};
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (sub == c_scan) return cmd_scan(ctx, scan);
        if (sub == c_fit) return cmd_fit(ctx, fit);
        if (sub == c_power) return cmd_power(ctx, power);
        if (sub == c_budget) return cmd_budget(ctx, budget);
        if (sub == c_xrd) return cmd_xrd(ctx, xrd);
        if (sub == c_rrr) return cmd_rrr(ctx, rrr);
        if (sub == c_sheet) return cmd_sheet(ctx, sheet);
        if (sub == c_report) return cmd_report(ctx, rep);
        if (sub == c_synth) return cmd_synth(ctx, sy);
    } catch (const std::exception& e) {
        err << "qloss " << name << ": " << e.what() << "\n";
        return kExitError;
    }
    err << "qloss: unhandled subcommand " << name << "\n";
    return kExitError;
}

}  // namespace qloss::app
