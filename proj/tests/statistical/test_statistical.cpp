#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"
#include "ltube/pvp.hpp"
#include "ltube/rng.hpp"
#include "ltube/sections.hpp"

using namespace ltube;

namespace {

QuenchedTube preset_tube(TemplatePreset preset, double perturbation = 0, std::uint64_t seed = 1) {
    TubeConfig cfg;
    cfg.cell = preset_parameters(preset);
    cfg.perturbation = perturbation;
    cfg.seed = seed;
    return QuenchedTube(cfg);
}

// One pass of poincare_N over 1e5 mu_N samples, shared by the tests below.
struct GatePass {
    std::int64_t samples{0};
    std::int64_t zero_collision{0};
    std::int64_t singular{0};
    std::vector<int> exits;
};

const GatePass& gate_pass() {
    static const GatePass pass = [] {
        const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
        Rng rng(101);
        GatePass r;
        for (const SectionPoint& p : sample_measure(tube, SectionSpec::N(0), 100000, rng)) {
            ++r.samples;
            try {
                const SectionReturn ret = poincare_N(tube, p);
                if (ret.collisions == 0) ++r.zero_collision;
                r.exits.push_back(ret.exit_sign);
            } catch (const SingularOrbit&) {
                ++r.singular;
            }
        }
        return r;
    }();
    return pass;
}

}  // namespace

TEST(GateMeasure, MeanCosineIsTwoThirds) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    Rng rng(1);
    const std::int64_t n = 100000;
    double sum = 0;
    for (const SectionPoint& p : sample_measure(tube, SectionSpec::N(0), n, rng)) sum += p.cos_out;
    const double mean = sum / static_cast<double>(n);
    // cosine-weighted hemisphere: E[c] = 2/3, Var[c] = 1/2 - 4/9
    const double sigma = std::sqrt((0.5 - 4.0 / 9.0) / static_cast<double>(n));
    EXPECT_LE(std::abs(mean - 2.0 / 3.0), 3 * sigma) << "mean " << mean;
}

TEST(GateMeasure, PositionsAreUniformOnTheGate) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const double g = tube.config().cell.g;
    Rng rng(2);
    const std::int64_t n = 100000;
    std::vector<double> counts(100, 0);
    for (const SectionPoint& p : sample_measure(tube, SectionSpec::N(0), n, rng)) {
        const int i = std::clamp(static_cast<int>((p.x.q.y - (0.5 - g / 2)) / g * 10), 0, 9);
        const int j = std::clamp(static_cast<int>((p.x.q.z - (0.5 - g / 2)) / g * 10), 0, 9);
        counts[static_cast<std::size_t>(10 * i + j)] += 1;
    }
    const double expected = static_cast<double>(n) / 100;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 0.99 quantile of chi-square with 99 degrees of freedom
    EXPECT_LE(chi2, 134.642) << "chi2 " << chi2;
}

TEST(GateMap, NoCollisionlessPassage) {
    const GatePass& r = gate_pass();
    EXPECT_EQ(r.samples, 100000);
    EXPECT_EQ(r.zero_collision, 0);
}

TEST(GateMap, ExitSignHasZeroMean) {
    const GatePass& r = gate_pass();
    ASSERT_GT(r.exits.size(), 99000u);
    double s = 0, s2 = 0;
    for (int e : r.exits) {
        s += e;
        s2 += e * e;
    }
    const double n = static_cast<double>(r.exits.size());
    const double mean = s / n;
    const double sigma = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean), 3 * sigma) << "mean exit " << mean;
}

TEST(FirstReturn, FixedCigarIsRevisited) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const SectionSpec D = SectionSpec::D(0, {0});
    Rng rng(3);
    std::int64_t returned = 0;
    std::int64_t total = 0;
    for (const SectionPoint& p : sample_measure(tube, D, 1000, rng)) {
        try {
            ++total;
            if (first_return_D(tube, D, p, 1'000'000)) ++returned;
        } catch (const SingularOrbit&) {
        }
    }
    EXPECT_GE(static_cast<double>(returned) / static_cast<double>(total), 0.99)
        << returned << " of " << total;
}

TEST(Mixing, CosineDecorrelatesAlongReturns) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    Rng rng(4);
    const Observable f = [](const SectionPoint& p) { return p.cos_out; };
    const CorrelationResult r =
        autocorrelation(tube, SectionSpec::D(0, {0, 1, 2, 3}), f, {0, 1, 50}, 1'000'000, rng, true, true);
    EXPECT_EQ(r.returns, 1'000'000);
    EXPECT_NEAR(r.values[0], 1, 1e-12);
    EXPECT_LT(std::abs(r.values[2]), 0.05) << "corr(50) = " << r.values[2];
}

TEST(ReturnBound, CollisionsWithinWindowLStayBelowK3) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix, 0.01, 5);
    const double L = tube.constants().L;
    const std::int64_t K3 = tube.constants().K3;
    Rng rng(5);
    std::int64_t worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const Trajectory tr = trace(tube, sample_free_element(tube, 0, rng), StopCondition::time(L));
        worst = std::max(worst, tr.final_state.collisions);
    }
    EXPECT_LE(worst, K3);
}

TEST(SingularityScaling, FiniteOmegaRatiosAreUniform) {
    TubeConfig cfg;
    cfg.mode = TubeMode::FiniteOmega;
    CellParameters a = preset_parameters(TemplatePreset::Appendix);
    CellParameters b = a;
    b.rho = 0.52;
    cfg.templates = {a, b};
    cfg.seed = 1;
    const QuenchedTube tube(cfg);
    A6Options opt;
    opt.samples = 4000;
    opt.area_resolution = 300;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    int alphas = 0;
    for (std::int64_t n = 0; n < 3 && alphas < 10; ++n) {
        for (int s = 0; s < 4 && alphas < 10; ++s) {
            const std::vector<A6Row> rows = check_A6(tube, n, s, {1e-2, 1e-3}, opt);
            EXPECT_LE(ratio_spread(rows), 2) << "cell " << n << " scatterer " << s;
            for (const A6Row& r : rows) {
                lo = std::min(lo, r.ratio);
                hi = std::max(hi, r.ratio);
            }
            ++alphas;
        }
    }
    EXPECT_EQ(alphas, 10);
    EXPECT_GT(lo, 0);
    EXPECT_LE(hi / lo, 10) << "ratios in [" << lo << ", " << hi << "]";
}

TEST(PvpInvariance, FStepPreservesTheGateMeasure) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix, 0.01, 6);
    InvarianceOptions opt;
    opt.seed = 6;
    const InvarianceResult r = measure_invariance_test(tube, InvarianceMap::FStep, 100000, opt);
    EXPECT_TRUE(r.pass) << "p = " << r.p_value;
}
