#include <random>

#include <benchmark/benchmark.h>

#include "overscale/fitting.hpp"
#include "overscale/lawform.hpp"
#include "overscale/stats.hpp"
#include "overscale/synth.hpp"
#include "overscale/testbed.hpp"

using namespace overscale;

namespace {

std::vector<LossPoint> loss_points(std::span<const RunRecord> runs) {
    std::vector<LossPoint> pts;
    for (const auto& r : runs) {
        const auto g = r.geometry();
        pts.push_back({g.compute_c, g.multiplier_m, r.loss("val"), r.id});
    }
    return pts;
}

void BM_EvalLossCM(benchmark::State& state) {
    const auto law = reference_laws::c4_loss();
    double c = 1e18;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval_loss_cm(law, c, 20.0));
        c *= 1.0000001;
    }
}
BENCHMARK(BM_EvalLossCM);

void BM_OptimalMultiplier(benchmark::State& state) {
    const auto law = reference_laws::redpajama_loss();
    for (auto _ : state) {
        benchmark::DoNotOptimize(optimal_multiplier(law));
    }
}
BENCHMARK(BM_OptimalMultiplier);

void BM_FitLossCM(benchmark::State& state) {
    const auto runs = generate_runs(reference_laws::c4_loss(), std::nullopt, table2_grid(), std::nullopt,
                                    {0.005, 0.0}, 1);
    const auto pts = loss_points(runs);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_loss_cm(pts));
    }
}
BENCHMARK(BM_FitLossCM)->Unit(benchmark::kMicrosecond);

void BM_FitLossCMSweepGrid(benchmark::State& state) {
    const auto runs = generate_runs(reference_laws::c4_loss(), std::nullopt, sweep_grid(), std::nullopt,
                                    {0.005, 0.0}, 1);
    const auto pts = loss_points(runs);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_loss_cm(pts));
    }
}
BENCHMARK(BM_FitLossCMSweepGrid)->Unit(benchmark::kMicrosecond);

void BM_ParetoFrontier(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::int64_t> tok(1, 1'000'000);
    std::uniform_real_distribution<double> loss(1.0, 5.0);
    std::vector<RunRecord> runs(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < runs.size(); ++i) {
        runs[i].id = std::to_string(i);
        runs[i].params_n = 1000;
        runs[i].tokens_d = tok(rng);
        runs[i].losses["val"] = loss(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(pareto_frontier(runs, "val"));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ParetoFrontier)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_BootstrapPowerLaw(benchmark::State& state) {
    const PowerLaw truth{1.51, 334.83, 0.121};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<PowerPoint> pts;
    for (int i = 0; i < 12; ++i) {
        const double c = std::pow(10.0, 16.0 + 5.0 * i / 11.0);
        pts.push_back({c, eval_power_law(truth, c) + noise(rng), std::to_string(i)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(bootstrap_fit(std::span<const PowerPoint>(pts), {}, {200, 0.95, 0, 0.2}));
    }
}
BENCHMARK(BM_BootstrapPowerLaw)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
