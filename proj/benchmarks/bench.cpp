#include <benchmark/benchmark.h>

#include "sqzcav/estimator.hpp"
#include "sqzcav/oracle.hpp"
#include "sqzcav/synth.hpp"

using namespace sqzcav;

namespace {

const RingCavity kCavity = RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, kSpeedOfLight / 1064e-9);
const Detuning kDetuning{-11.098e6};
const InputSqueezingModel kSqueezing = InputSqueezingModel::opo_lorentzian(0.41, 66.2e6, 0.7);
const DetectionModel kDetection = DetectionModel::from_coupled(0.765);

MeasurementConfig measurement() {
    MeasurementConfig m;
    m.rbw_hz = 100e3;
    m.n_averages = 100.0;
    m.seed = 11;
    return m;
}

FitSpec nominal_spec() {
    FitSpec spec;
    spec.float_params = {Param::sqrt_r1, Param::sqrt_r1r2r3, Param::omega_d_hz};
    spec.initial_guess = {{Param::sqrt_r1, 0.9975}, {Param::sqrt_r1r2r3, 0.9958}, {Param::omega_d_hz, -11.3e6}};
    spec.fixed_params = {{Param::fsr_hz, 713e6},
                         {Param::pump_x, 0.41},
                         {Param::opo_linewidth_hz, 66.2e6},
                         {Param::escape_purity, 0.7},
                         {Param::eta_c, 0.765}};
    spec.context.squeezing = kSqueezing;
    spec.context.rbw_hz = 100e3;
    return spec;
}

}  // namespace

static void BM_Spectrum(benchmark::State& state) {
    const auto grid = linear_grid(5e6, 20e6, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(spectrum(kCavity, kDetuning, kSqueezing, kDetection, grid));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Spectrum)->Arg(401)->Arg(6001);

static void BM_SynthesizeTrace(benchmark::State& state) {
    const auto grid = linear_grid(5e6, 20e6, 401);
    const auto m = measurement();
    for (auto _ : state) benchmark::DoNotOptimize(synthesize_trace(kCavity, kDetuning, kSqueezing, kDetection, m, grid));
}
BENCHMARK(BM_SynthesizeTrace);

static void BM_FitNominalSet(benchmark::State& state) {
    const auto trace = synthesize_trace(kCavity, kDetuning, kSqueezing, kDetection, measurement(),
                                        linear_grid(5e6, 20e6, 401));
    const auto spec = nominal_spec();
    for (auto _ : state) benchmark::DoNotOptimize(fit(trace, spec));
    state.SetLabel("3 floated, both signs");
}
BENCHMARK(BM_FitNominalSet)->Unit(benchmark::kMillisecond);

static void BM_MonteCarlo(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            oracle::monte_carlo_variances(kCavity, kDetuning, kSqueezing, kDetection, 11e6, n, 3));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarlo)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_SidebandOracle(benchmark::State& state) {
    const auto in = oracle::SidebandState::from_quadratures(0.4, 4.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(oracle::propagate_sidebands(kCavity, kDetuning, kDetection, in, 11e6));
    }
}
BENCHMARK(BM_SidebandOracle);
BENCHMARK_MAIN();
