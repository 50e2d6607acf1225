#include <benchmark/benchmark.h>

#include "ltube/analysis.hpp"
#include "ltube/rng.hpp"

using namespace ltube;

static void BM_Lyapunov(benchmark::State& state) {
    TubeConfig cfg;
    const QuenchedTube tube(cfg);
    Rng rng(1);
    const LineElement x0 = sample_free_element(tube, 0, rng);
    const auto method = state.range(0) == 0 ? LyapunovMethod::Tangent : LyapunovMethod::Shadow;
    for (auto _ : state) benchmark::DoNotOptimize(lyapunov_spectrum(tube, x0, 1000, method, rng));
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Lyapunov)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_DiamondStep(benchmark::State& state) {
    DiamondState s{0.5, 0.5, 0.6, 0.8};
    for (auto _ : state) {
        s = diamond_step(0.55, s).state;
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_DiamondStep);

static void BM_EnergyTest(benchmark::State& state) {
    Rng rng(2);
    std::vector<SectionCoords> a, b;
    for (int i = 0; i < state.range(0); ++i) {
        a.push_back({rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()});
        b.push_back({rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()});
    }
    InvarianceOptions opt;
    for (auto _ : state) benchmark::DoNotOptimize(energy_two_sample_test(a, b, opt));
}
BENCHMARK(BM_EnergyTest)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
