#include <gtest/gtest.h>

#include <cmath>

#include "ltube/errors.hpp"
#include "ltube/flow.hpp"
#include "ltube/rng.hpp"
#include "ltube/sections.hpp"
#include "ltube/tube.hpp"

using namespace ltube;

namespace {

QuenchedTube preset_tube(TemplatePreset preset) {
    TubeConfig cfg;
    cfg.cell = preset_parameters(preset);
    return QuenchedTube(cfg);
}

// Post-collisional velocity rotated by `angle` about the axis n x v, so v . n
// changes continuously.
Vec3 tilt(const Vec3& v, const Vec3& n, double angle) {
    Vec3 axis = cross(n, v);
    if (norm(axis) < 1e-12) axis = any_orthogonal(n);
    axis = normalized(axis);
    return std::cos(angle) * v + std::sin(angle) * cross(axis, v) + (1 - std::cos(angle)) * dot(axis, v) * axis;
}

}  // namespace

TEST(SampleMeasure, NPointsLieOnTheGatesAndEnter) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    Rng rng(1);
    const double g = tube.config().cell.g;
    int gate1 = 0;
    for (const SectionPoint& p : sample_measure(tube, SectionSpec::N(0), 5000, rng)) {
        EXPECT_EQ(p.section, SectionKind::N);
        const double x = p.gate() == 1 ? 0 : tube.h();
        gate1 += p.gate() == 1;
        EXPECT_EQ(p.x.q.x, x);
        EXPECT_LE(std::abs(p.x.q.y - 0.5), g / 2);
        EXPECT_LE(std::abs(p.x.q.z - 0.5), g / 2);
        const double vo = p.gate() == 1 ? p.x.v.x : -p.x.v.x;
        EXPECT_GT(vo, 0);
        EXPECT_DOUBLE_EQ(p.cos_out, vo);
        EXPECT_NEAR(norm(p.x.v), 1, 1e-15);
    }
    EXPECT_GT(gate1, 2300);
    EXPECT_LT(gate1, 2700);
}

TEST(SampleMeasure, MPointsLieOnCigarsInTheCap) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const double eps = tube.constants().eps;
    Rng rng(2);
    const CellConfig& cell = tube.cell(0);
    for (const SectionPoint& p : sample_measure(tube, SectionSpec::M_all(0, eps), 5000, rng)) {
        const Surface& s = cell.surfaces.at(p.surface_index);
        ASSERT_TRUE(s.dispersing);
        EXPECT_LE(std::abs(revolution_gap(*s.revolution(), p.x.q)), 1e-12);
        EXPECT_TRUE(cell.is_free(p.x.q + 1e-9 * surface_normal(s, p.x.q)));
        EXPECT_GE(p.cos_out, eps);
        EXPECT_NEAR(p.cos_out, dot(p.x.v, surface_normal(s, p.x.q)), 1e-15);
    }
}

TEST(SampleMeasure, DegenerateCapIsRejected) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    Rng rng(3);
    EXPECT_THROW(sample_measure(tube, SectionSpec::M(0, 0, 1.0), 10, rng), InvalidSection);
    const QuenchedTube empty = preset_tube(TemplatePreset::Empty);
    EXPECT_THROW(sample_measure(empty, SectionSpec::M_all(0, 0.01), 10, rng), InvalidSection);
}

double integrand_radius(const CellParameters& p, double x) {
    const double u = x - p.h / 2;
    return p.rho + std::sqrt(p.r_long * p.r_long - u * u) - p.r_long;
}

TEST(SectionArea, GatesAndCigarMatchQuadrature) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const CellParameters& p = tube.config().cell;
    EXPECT_NEAR(section_area(tube, SectionSpec::N(0)), 2 * p.g * p.g, 1e-12);

    // Free arc of the corner cigar at radius r spans pi/2 - 2 acos(1/(2r));
    // Simpson's rule over the meridian with the arc-length factor.
    auto integrand = [&](double x) {
        const double u = x - p.h / 2;
        const double root = std::sqrt(p.r_long * p.r_long - u * u);
        const double r = p.rho + root - p.r_long;
        const double slope = -u / root;
        return r * (M_PI / 2 - 2 * std::acos(1 / (2 * r))) * std::sqrt(1 + slope * slope);
    };
    const int n = 2000;
    const double dx = p.h / n;
    double simpson = integrand(0) + integrand(p.h);
    for (int i = 1; i < n; ++i) simpson += (i % 2 ? 4 : 2) * integrand(i * dx);
    simpson *= dx / 3;

    const double eps = tube.constants().eps;
    const double area = section_area(tube, SectionSpec::M(0, 0, eps), 1000);
    // The grid resolves each end of the free arc to within one angular step.
    const double r_min = integrand_radius(p, 0);
    const double arc_min = M_PI / 2 - 2 * std::acos(1 / (2 * r_min));
    EXPECT_NEAR(area / simpson, 1, 2 * (2 * M_PI / 1000) / arc_min);
    EXPECT_NEAR(section_measure(tube, SectionSpec::M(0, 0, eps), 1000), area * M_PI * (1 - eps * eps), 1e-12);
}

TEST(PoincareN, EmptyCellPassesStraightThrough) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Empty);
    const SectionPoint p = gate_point(tube.cell(0), 1, {{0, 0.5, 0.5}, {1, 0, 0}});
    const SectionReturn r = poincare_N(tube, p);
    EXPECT_EQ(r.exit_sign, 1);
    EXPECT_EQ(r.collisions, 0);
    EXPECT_EQ(r.point.id.cell, 1);
    EXPECT_EQ(r.point.gate(), 1);
    EXPECT_NEAR(r.point.x.q.x, 0, 1e-11);
    EXPECT_NEAR(r.point.x.q.y, 0.5, 1e-15);
    EXPECT_NEAR(r.point.x.q.z, 0.5, 1e-15);
    EXPECT_NEAR(r.time, tube.h(), 1e-11);
}

TEST(PoincareN, NotExitedWhenBudgetRunsOut) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    Rng rng(4);
    const SectionPoint p = sample_measure(tube, SectionSpec::N(0), 1, rng).front();
    EXPECT_THROW(poincare_N(tube, p, 0), NotExited);
}

TEST(FirstReturnD, PingPongBetweenFacingWalls) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Empty);
    const CellConfig& cell = tube.cell(0);
    const int wall = cell.find(scatterer::kSideFirst);  // y = 0
    const SectionPoint p = surface_point(cell, SectionKind::D, wall, {6, 0, 0.3}, {0, 1, 0});
    const SectionSpec D = SectionSpec::D(0, {scatterer::kSideFirst});
    const auto r = first_return_D(tube, D, p, 100);
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->collisions, 2);
    EXPECT_NEAR(r->time, 2.0, 1e-11);
    EXPECT_EQ(r->point.id.scatterer, scatterer::kSideFirst);
    EXPECT_NEAR(r->point.x.q.y, 0, 1e-15);
    EXPECT_FALSE(first_return_D(tube, D, p, 0).has_value());
    EXPECT_FALSE(first_return_D(tube, D, p, 1).has_value());
}

TEST(PoincareM, ReturnsAreHeadOnAndWithinFiniteHorizon) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const DerivedConstants& c = tube.constants();
    Rng rng(5);
    int checked = 0;
    for (SectionPoint p : sample_measure(tube, SectionSpec::M_all(0, c.eps), 10000, rng)) {
        SectionReturn r;
        try {
            r = poincare_M(tube, p, c.eps);
        } catch (const SingularOrbit&) {
            continue;
        }
        ++checked;
        EXPECT_LE(r.time, c.L);
        EXPECT_LE(r.collisions, c.K3);
        const CellConfig& cell = tube.cell(r.point.id.cell);
        const Surface& s = cell.surfaces.at(r.point.surface_index);
        EXPECT_TRUE(s.dispersing);
        EXPECT_GE(r.point.cos_out, c.eps);
        EXPECT_NEAR(r.point.cos_out, dot(r.point.x.v, surface_normal(s, r.point.x.q)), 1e-12);
    }
    EXPECT_GT(checked, 9900);
}

TEST(PoincareM, LandingExactlyOnTheCapBoundaryIsSingular) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    Rng rng(6);
    const SectionPoint p = sample_measure(tube, SectionSpec::N(0), 1, rng).front();
    const Trajectory tr = trace(tube, p.state(), StopCondition::collisions(1000));
    double c = -1;
    for (const CollisionEvent& ev : tr.events) {
        if (ev.kind == EventKind::Dispersing) {
            c = -ev.hit.cos_incidence;
            break;
        }
    }
    ASSERT_GT(c, 0);
    EXPECT_THROW(poincare_M(tube, p, c), SingularOrbit);
    const MWalk w = walk_M(tube, p, c, 100000, false);
    EXPECT_EQ(w.status, ReturnStatus::SectionBoundary);
    const SectionReturn below = poincare_M(tube, p, c / 2);
    EXPECT_NEAR(below.point.cos_out, c, 1e-12);
}

TEST(PoincareM, NearbyPointsAcrossASingularityHaveDifferentItineraries) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const double eps = tube.constants().eps;
    Rng rng(7);
    const CellConfig& cell = tube.cell(0);
    int found = 0;
    for (const SectionPoint& p : sample_measure(tube, SectionSpec::M_all(0, eps), 200, rng)) {
        const Vec3 n = surface_normal(cell.surfaces[p.surface_index], p.x.q);
        auto at = [&](double a) {
            return surface_point(cell, SectionKind::M, p.surface_index, p.x.q, tilt(p.x.v, n, a));
        };
        auto itinerary = [&](double a) { return walk_M(tube, at(a), eps, 1'000'000, true); };
        double lo = 0, hi = 0.05;
        MWalk wl = itinerary(lo), wh = itinerary(hi);
        if (wl.status != ReturnStatus::Returned || wh.status != ReturnStatus::Returned) continue;
        if (at(hi).cos_out < eps || wl.itinerary == wh.itinerary) continue;
        // Bisection on the tilt down to a 1e-6 gap.
        while (hi - lo > 1e-6) {
            const double mid = 0.5 * (lo + hi);
            const MWalk wm = itinerary(mid);
            if (wm.status != ReturnStatus::Returned) {
                lo = hi;  // landed on the singular set itself
                break;
            }
            if (wm.itinerary == wl.itinerary) {
                lo = mid;
            } else {
                hi = mid;
                wh = wm;
            }
        }
        if (lo == hi) continue;
        EXPECT_LE(hi - lo, 1e-6);
        EXPECT_NE(itinerary(lo).itinerary, itinerary(hi).itinerary);
        if (++found == 5) break;
    }
    EXPECT_EQ(found, 5);
}

TEST(Sections, NAndMReturnsAgreeWithTheUnderlyingTrajectory) {
    const QuenchedTube tube = preset_tube(TemplatePreset::Appendix);
    const double eps = tube.constants().eps;
    Rng rng(8);
    const SectionPoint p0 = sample_measure(tube, SectionSpec::N(0), 1, rng).front();
    const Trajectory tr = trace(tube, p0.state(), StopCondition::collisions(300000));
    ASSERT_EQ(tr.termination, Termination::Budget);

    std::vector<const CollisionEvent*> gates, headon;
    for (const CollisionEvent& ev : tr.events) {
        if (ev.kind == EventKind::GateCrossing) gates.push_back(&ev);
        if (ev.kind == EventKind::Dispersing && -ev.hit.cos_incidence >= eps) headon.push_back(&ev);
    }
    ASSERT_GT(gates.size(), 10u);
    ASSERT_GT(headon.size(), 20u);

    SectionPoint p = p0;
    for (int k = 0; k < 10; ++k) {
        const SectionReturn r = poincare_N(tube, p);
        const CollisionEvent& ev = *gates[k];
        EXPECT_EQ(r.point.id.cell, ev.after.cell);
        EXPECT_LE(norm(r.point.x.q - ev.after.x.q), 1e-10);
        EXPECT_LE(norm(r.point.x.v - ev.after.x.v), 1e-10);
        p = r.point;
    }
    p = p0;
    for (int k = 0; k < 20; ++k) {
        const SectionReturn r = poincare_M(tube, p, eps);
        const CollisionEvent& ev = *headon[k];
        EXPECT_EQ(r.point.id.cell, ev.before.cell);
        EXPECT_LE(norm(r.point.x.q - ev.hit.point), 1e-10);
        EXPECT_LE(norm(r.point.x.v - ev.after.x.v), 1e-10);
        p = r.point;
    }
}
