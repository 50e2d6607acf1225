// Acceptance runner: `ltube_acceptance <criterion>` prints one PASS/FAIL line
// per check and exits non-zero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"
#include "ltube/precision.hpp"
#include "ltube/pvp.hpp"
#include "ltube/rng.hpp"

using namespace ltube;

namespace {

int failures = 0;
int current = 0;

void report(bool ok, const std::string& what) {
    std::printf("criterion %d: %s %s\n", current, ok ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

QuenchedTube default_tube(double perturbation = 0, std::uint64_t seed = 0) {
    TubeConfig cfg;
    cfg.perturbation = perturbation;
    cfg.seed = seed;
    return QuenchedTube(cfg);
}

// 1. speed conservation and extended-precision reversibility
void criterion_1() {
    const QuenchedTube tube = default_tube();
    Rng rng(1);
    FlowState s = make_state(tube, sample_free_element(tube, 0, rng));
    double worst = 0;
    std::int64_t events = 0;
    while (events < 1'000'000) {
        const CollisionEvent ev = next_event(tube, s);
        if (is_singular(ev.kind)) {
            s = make_state(tube, sample_free_element(tube, s.cell, rng));
            continue;
        }
        worst = std::max(worst, std::abs(norm(ev.after.x.v) - 1));
        s = ev.after;
        ++events;
    }
    report(worst <= 1e-12, "speed | |v| - 1 | max " + fmt(worst) + " over 1e6 events (tol 1e-12)");

    int done = 0;
    double rev = 0;
    const double h = tube.h();
    for (int attempt = 0; attempt < 1000 && done < 100; ++attempt) {
        const auto x = LineElementT<HighReal>::from(sample_free_element(tube, 0, rng));
        const auto s0 = make_state(tube, LineElementT<HighReal>{x.q, x.v / norm(x.v)});
        const auto fwd = trace(tube, s0, StopCondition::collisions(50));
        if (fwd.termination != Termination::Budget) continue;
        const auto back = trace(tube, reversed(fwd.final_state), StopCondition::collisions(50));
        if (back.termination != Termination::Budget) continue;
        const HighReal T = fwd.final_state.time;
        const auto end = advance(back.final_state, HighReal(2 * T - back.final_state.time));
        const double dq = static_cast<double>(norm(end.world_q(h) - s0.world_q(h)));
        const double dv = static_cast<double>(norm(end.x.v + s0.x.v));
        rev = std::max({rev, dq, dv});
        ++done;
    }
    report(done == 100 && rev <= 1e-7,
           "reversibility max " + fmt(rev) + " over " + std::to_string(done) + " 50-collision orbits (tol 1e-7)");
}

// 2. diamond-billiard projection in the cylindrical limit
void criterion_2() {
    TubeConfig cfg;
    cfg.cell = preset_parameters(TemplatePreset::Cylindrical);
    const QuenchedTube tube(cfg);
    Rng rng(2);
    int done = 0;
    int singular = 0;
    double pt = 0, id = 0;
    while (done < 100) {
        try {
            const ProjectionReport r = projection_check(tube, sample_free_element(tube, 0, rng), 100);
            pt = std::max(pt, r.max_point_deviation);
            id = std::max(id, r.max_identity_deviation);
            ++done;
        } catch (const SingularOrbit&) {
            ++singular;
        }
    }
    report(pt <= 1e-9, "projection max deviation " + fmt(pt) + " over 100 orbits x 100 collisions (tol 1e-9; " +
                           std::to_string(singular) + " singular redrawn)");
    report(id <= 1e-12, "incidence identity max " + fmt(id) + " (tol 1e-12)");
}

// 3. derived constants against an independent extended-precision evaluation
void criterion_3() {
    const DerivedConstants c = default_tube().constants();
    using boost::multiprecision::acos;
    using boost::multiprecision::ceil;
    using boost::multiprecision::sin;
    using boost::multiprecision::sqrt;
    const HighReal h = 12, rho = HighReal(55) / 100;
    const HighReal pi = boost::math::constants::pi<HighReal>();
    const HighReal gamma = acos(1 / (2 * rho));
    const HighReal M = ceil(pi / gamma);
    const HighReal L1 = 1 / sqrt(HighReal(2)) - rho;
    const HighReal L2 = 2 * h * M;
    const HighReal L3 = 3 * h / sqrt(1 - HighReal(1) / 10000);
    const HighReal L = 2 * (L2 + L3);
    const HighReal K3 = ceil(L / L1) * M + ceil(3 * L / h);
    const HighReal eta = pi / 2 - acos(sin(gamma / 2) / 100);
    const HighReal eps = boost::multiprecision::cos(pi / 2 - eta);

    auto rel = [](double got, const HighReal& want) {
        const double w = static_cast<double>(want);
        return std::abs(got - w) / std::abs(w);
    };
    auto check = [&](const char* name, double got, const HighReal& want) {
        const double r = rel(got, want);
        report(r <= 1e-9, std::string(name) + " = " + fmt(got) + " rel err " + fmt(r) + " (tol 1e-9)");
    };
    check("gamma", c.gamma, gamma);
    report(c.M == static_cast<std::int64_t>(M) && c.M == 8, "M = " + std::to_string(c.M) + " (exact 8)");
    check("L1", c.L1, L1);
    check("L2", c.L2, L2);
    check("L3", c.L3, L3);
    check("L", c.L, L);
    report(c.K3 == static_cast<std::int64_t>(K3) && c.K3 == 23339, "K3 = " + std::to_string(c.K3) + " (exact 23339)");
    check("eta", c.eta, eta);
    check("eps", c.eps, eps);
    const bool quoted = std::abs(c.gamma - 0.42970) <= 5e-6 && std::abs(c.L1 - 0.157107) <= 5e-7 && c.L2 == 192 &&
                        std::abs(c.L3 - 36.0018) <= 5e-5 && std::abs(c.L - 456.0036) <= 5e-5;
    report(quoted, "quoted decimals gamma 0.42970, L1 0.157107, L2 192, L3 36.0018, L 456.0036");
}

// 4. head-on windows and collision bound
void criterion_4() {
    const QuenchedTube tube = default_tube();
    A4Options opt;
    opt.seed = 4;
    const A4Report r = check_A4(tube, 100, 100, opt);
    report(r.windows == 10000 && r.headon_window_fraction == 1.0,
           "head-on window fraction " + fmt(r.headon_window_fraction) + " over " + std::to_string(r.windows) +
               " windows (need 1.0)");
    report(r.max_collisions_per_L <= r.K3, "max collisions per window " + std::to_string(r.max_collisions_per_L) +
                                               " (K3 = " + std::to_string(r.K3) + ")");
}

// 5. invariance of mu_N under the gate map, with a negative control
void criterion_5() {
    const QuenchedTube tube = default_tube();
    InvarianceOptions opt;
    opt.seed = 5;
    const InvarianceResult r = measure_invariance_test(tube, InvarianceMap::PoincareN, 100000, opt);
    report(r.pass, "poincare-n energy test p = " + fmt(r.p_value) + " at level 0.01, " + std::to_string(r.samples) +
                       " samples");
    opt.biased_reference = true;
    const InvarianceResult b = measure_invariance_test(tube, InvarianceMap::Identity, 100000, opt);
    report(!b.pass, "biased control rejected, p = " + fmt(b.p_value));
}

// 6. hyperbolicity
void criterion_6() {
    const QuenchedTube tube = default_tube();
    Rng rng(6);
    std::vector<LyapunovResult> tangent, shadow;
    for (int i = 0; i < 10; ++i) {
        const LineElement x0 = sample_free_element(tube, 0, rng);
        Rng ra = Rng::for_stream(60, static_cast<std::uint64_t>(i));
        Rng rb = Rng::for_stream(61, static_cast<std::uint64_t>(i));
        tangent.push_back(lyapunov_spectrum(tube, x0, 10000, LyapunovMethod::Tangent, ra));
        shadow.push_back(lyapunov_spectrum(tube, x0, 10000, LyapunovMethod::Shadow, rb));
    }
    const LyapunovResult t = combine_lyapunov(tangent);
    const LyapunovResult s = combine_lyapunov(shadow);
    report(t.ci1[0] > 0, "lambda1 = " + fmt(t.lambda1) + ", 99% CI [" + fmt(t.ci1[0]) + ", " + fmt(t.ci1[1]) +
                             "] excludes 0");
    const double diff = std::abs(t.lambda1 - s.lambda1) / std::abs(t.lambda1);
    report(diff <= 0.05, "tangent vs shadow relative difference " + fmt(diff) + " (tangent " + fmt(t.lambda1) +
                             ", shadow " + fmt(s.lambda1) + ", tol 0.05)");

    const double eps = tube.constants().eps;
    const std::int64_t K3 = tube.constants().K3;
    double min_factor = std::numeric_limits<double>::infinity();
    int done = 0, singular = 0;
    Rng rp(66);
    while (done < 1000) {
        const SectionPoint p = sample_measure(tube, SectionSpec::M_all(0, eps), 1, rp).front();
        try {
            const ExpansionResult r = expansion_factor(tube, p, K3, eps);
            min_factor = std::min(min_factor, r.factor);
            ++done;
        } catch (const SingularOrbit&) {
            ++singular;
        }
    }
    report(min_factor > 1, "min expansion factor " + fmt(min_factor) + " over 1000 M-points after K3 returns (" +
                               std::to_string(singular) + " singular redrawn)");
}

// 7. recurrence of the PVP cocycle
void criterion_7() {
    RecurrenceConfig cfg;
    cfg.tube.perturbation = 0.01;
    cfg.tube_seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    cfg.orbits_per_tube = 100;
    cfg.n_max = 10000;
    cfg.master_seed = 7;
    const RecurrenceReport r = recurrence_ensemble(cfg);
    report(r.orbits == 1000 && r.return_fraction >= 0.9,
           "return fraction " + fmt(r.return_fraction) + " of " + std::to_string(r.orbits) +
               " orbits within n <= 10000 (need >= 0.9)");
    report(r.drift_ok, "drift " + fmt(r.drift) + " at horizon " + std::to_string(r.horizon) + " within band " +
                           fmt(r.drift_band));
    bool monotone = true;
    double prev = 0;
    for (std::int64_t n = 0; n <= cfg.n_max; n += 100) {
        const double f = r.return_fraction_at(n);
        if (f < prev) monotone = false;
        prev = f;
    }
    report(monotone && r.return_fraction_at(cfg.n_max) == r.return_fraction, "return fraction monotone in budget");
}

// 8. linear scaling of the singularity neighbourhood
void criterion_8() {
    const QuenchedTube tube = default_tube();
    A6Options opt;
    opt.seed = 8;
    const std::vector<A6Row> rows = check_A6(tube, 0, 0, {1e-2, 1e-3, 1e-4}, opt);
    std::string detail;
    for (const A6Row& r : rows) detail += " " + fmt(r.ratio);
    const double spread = ratio_spread(rows);
    report(spread <= 2, "A6 ratio spread " + fmt(spread) + " (ratios" + detail + "; tol 2)");
}

// 9. determinism of the ensemble output
void criterion_9() {
    RecurrenceConfig cfg;
    cfg.tube.perturbation = 0.01;
    cfg.tube_seeds = {1, 2};
    cfg.orbits_per_tube = 20;
    cfg.n_max = 1000;
    cfg.master_seed = 9;
    cfg.workers = 2;
    std::ostringstream a, b;
    write_orbit_csv(a, recurrence_ensemble(cfg).records);
    write_orbit_csv(b, recurrence_ensemble(cfg).records);
    report(a.str() == b.str() && !a.str().empty(), "per-orbit CSV identical across two runs (" +
                                                       std::to_string(a.str().size()) + " bytes)");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <criterion 1-9>\n", argv[0]);
        return 2;
    }
    current = std::atoi(argv[1]);
    void (*const run[])() = {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                             criterion_6, criterion_7, criterion_8, criterion_9};
    if (current < 1 || current > 9) {
        std::fprintf(stderr, "criterion must be 1-9\n");
        return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
        run[current - 1]();
    } catch (const std::exception& e) {
        report(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %.1f s\n", current, secs);
    return failures == 0 ? 0 : 1;
}
