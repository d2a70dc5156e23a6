#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "qloss/circlefit.hpp"
#include "qloss/filmchar.hpp"
#include "qloss/lossbudget.hpp"
#include "qloss/tlsloss.hpp"

using namespace qloss;

static void BM_FitResonance(benchmark::State& state) {
    const circlefit::NotchParams p{6e9, 5e4, 1e5, 0.3, 0.8, 1.0, 30e-9};
    const auto grid = circlefit::linewidth_grid(p.fr, p.ql, 10.0, static_cast<std::size_t>(state.range(0)));
    const auto sweep = circlefit::synthesize_notch(p, grid, 1e-3, 1);
    for (auto _ : state) benchmark::DoNotOptimize(circlefit::fit_resonance(sweep));
}
BENCHMARK(BM_FitResonance)->Arg(201)->Arg(1001)->Arg(5001)->Unit(benchmark::kMicrosecond);

static void BM_FitTls(benchmark::State& state) {
    const tlsloss::TlsParams t{2e-6, 10.0, 0.5, 1e-6};
    std::vector<tlsloss::LossPoint> pts;
    for (int i = 0; i < 20; ++i) {
        const double n = std::pow(10.0, -2.0 + 8.0 * i / 19.0);
        pts.push_back({n, tlsloss::eval_tls_model(n, t.delta_tls, t.n_c, t.beta, t.delta_hp), 0.0, 0.0, {}});
    }
    for (auto _ : state) benchmark::DoNotOptimize(tlsloss::fit_tls(pts));
}
BENCHMARK(BM_FitTls)->Unit(benchmark::kMicrosecond);

static void BM_FitPeaks(benchmark::State& state) {
    const std::vector<filmchar::PeakSpec> peaks{{36.9, 0.4, 1000.0, 0.5}, {42.8, 0.4, 600.0, 0.5}};
    const auto scan = filmchar::synthesize_xrd(peaks, 30.0, 50.0, 0.01, 20.0, 0.1, 2.0, 1);
    for (auto _ : state) benchmark::DoNotOptimize(filmchar::fit_peaks(scan, filmchar::default_windows()));
}
BENCHMARK(BM_FitPeaks)->Unit(benchmark::kMicrosecond);

static void BM_Decompose(benchmark::State& state) {
    const lossbudget::InterfaceLosses d{1e-3, 2e-3, 3e-3, 1e-7};
    const std::vector<lossbudget::ParticipationRow> rows{{0, 6e-4, 1e-5, 2e-4, 0.80},
                                                         {0, 1e-4, 8e-5, 3e-4, 0.85},
                                                         {0, 2e-4, 2e-5, 9e-4, 0.90},
                                                         {0, 3e-4, 4e-5, 4e-4, 0.30}};
    std::vector<lossbudget::Observation> obs;
    for (const auto& r : rows) obs.push_back({r, lossbudget::forward_loss(r, d), 0.0});
    for (auto _ : state) benchmark::DoNotOptimize(lossbudget::decompose(obs));
}
BENCHMARK(BM_Decompose)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
