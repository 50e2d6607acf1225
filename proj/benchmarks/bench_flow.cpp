#include <benchmark/benchmark.h>

#include "ltube/errors.hpp"
#include "ltube/flow.hpp"
#include "ltube/precision.hpp"
#include "ltube/pvp.hpp"
#include "ltube/rng.hpp"
#include "ltube/sections.hpp"

using namespace ltube;

namespace {

QuenchedTube default_tube(double perturbation = 0) {
    TubeConfig cfg;
    cfg.perturbation = perturbation;
    cfg.seed = 1;
    return QuenchedTube(cfg);
}

LineElement free_element(const QuenchedTube& tube, Rng& rng) {
    const CellConfig& cell = tube.cell(0);
    Vec3 q;
    do {
        q = {rng.uniform(0, cell.h()), rng.uniform(), rng.uniform()};
    } while (!cell.is_free(q));
    return {q, rng.unit_vector()};
}

}  // namespace

static void BM_CigarIntersect(benchmark::State& state) {
    const QuenchedTube tube = default_tube();
    const CellConfig& cell = tube.cell(0);
    const Surface& cigar = cell.surfaces[static_cast<std::size_t>(cell.find(0, 0))];
    Rng rng(1);
    std::vector<LineElement> rays;
    for (int i = 0; i < 1024; ++i) rays.push_back(free_element(tube, rng));
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(intersect_ray(cigar, rays[k++ & 1023], 0.0, 2 * cell.h()));
    }
}
BENCHMARK(BM_CigarIntersect);

static void BM_NextEvent(benchmark::State& state) {
    const QuenchedTube tube = default_tube(0.01);
    Rng rng(2);
    FlowState s = make_state(tube, free_element(tube, rng));
    for (auto _ : state) {
        const CollisionEvent ev = next_event(tube, s);
        s = is_singular(ev.kind) ? make_state(tube, free_element(tube, rng)) : ev.after;
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NextEvent);

static void BM_NextEventHighReal(benchmark::State& state) {
    const QuenchedTube tube = default_tube();
    Rng rng(3);
    auto s = make_state(tube, LineElementT<HighReal>::from(free_element(tube, rng)));
    for (auto _ : state) {
        const auto ev = next_event(tube, s);
        s = is_singular(ev.kind) ? make_state(tube, LineElementT<HighReal>::from(free_element(tube, rng))) : ev.after;
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NextEventHighReal);

static void BM_PoincareN(benchmark::State& state) {
    const QuenchedTube tube = default_tube();
    Rng rng(4);
    const std::vector<SectionPoint> pts = sample_measure(tube, SectionSpec::N(0), 256, rng);
    std::size_t k = 0;
    for (auto _ : state) {
        try {
            benchmark::DoNotOptimize(poincare_N(tube, pts[k++ & 255]));
        } catch (const SingularOrbit&) {
        }
    }
}
BENCHMARK(BM_PoincareN);

static void BM_FStep(benchmark::State& state) {
    const QuenchedTube tube = default_tube(0.01);
    Rng rng(5);
    PvpState s = sample_pvp_state(tube, rng);
    for (auto _ : state) {
        try {
            s = F_step(tube, s);
        } catch (const std::exception&) {
            s = sample_pvp_state(tube, rng);
        }
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_FStep);

static void BM_RealizeCell(benchmark::State& state) {
    TubeConfig cfg;
    cfg.perturbation = 0.01;
    cfg.seed = 6;
    const QuenchedTube tube(cfg);
    std::int64_t n = 0;
    for (auto _ : state) benchmark::DoNotOptimize(realize_cell(tube, n++));
}
BENCHMARK(BM_RealizeCell);
