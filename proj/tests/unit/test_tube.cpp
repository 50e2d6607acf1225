#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "ltube/errors.hpp"
#include "ltube/precision.hpp"
#include "ltube/rng.hpp"
#include "ltube/tube.hpp"

using namespace ltube;

namespace {

std::string geometry_error(const CellParameters& p) {
    try {
        validate_cell(p);
    } catch (const InvalidGeometry& e) {
        return e.what();
    }
    return {};
}

bool same_surface(const Surface& a, const Surface& b) {
    if (a.kind != b.kind || !(a.id == b.id) || a.dispersing != b.dispersing) return false;
    if (!(a.clip_lo == b.clip_lo) || !(a.clip_hi == b.clip_hi)) return false;
    if (const auto* ra = a.revolution()) {
        const auto* rb = b.revolution();
        return rb && ra->axis_point == rb->axis_point && ra->axis == rb->axis && ra->e1 == rb->e1 &&
               ra->e2 == rb->e2 && ra->rho == rb->rho && ra->r_long == rb->r_long &&
               ra->s_center == rb->s_center && ra->s_min == rb->s_min && ra->s_max == rb->s_max;
    }
    const auto* pa = a.planar();
    const auto* pb = b.planar();
    if (!pb || !(pa->origin == pb->origin) || !(pa->normal == pb->normal) || !(pa->e1 == pb->e1) ||
        !(pa->e2 == pb->e2) || pa->holes.size() != pb->holes.size())
        return false;
    auto same_poly = [](const ConvexPolygon& x, const ConvexPolygon& y) {
        if (x.vertices.size() != y.vertices.size()) return false;
        for (std::size_t i = 0; i < x.vertices.size(); ++i) {
            if (x.vertices[i].u != y.vertices[i].u || x.vertices[i].v != y.vertices[i].v) return false;
        }
        return true;
    };
    if (!same_poly(pa->outer, pb->outer)) return false;
    for (std::size_t i = 0; i < pa->holes.size(); ++i) {
        if (!same_poly(pa->holes[i], pb->holes[i])) return false;
    }
    return true;
}

bool same_cell(const CellConfig& a, const CellConfig& b) {
    if (a.n != b.n || !(a.omega == b.omega) || a.template_index != b.template_index) return false;
    if (a.surfaces.size() != b.surfaces.size() || a.solid_pieces != b.solid_pieces) return false;
    for (std::size_t i = 0; i < a.surfaces.size(); ++i) {
        if (!same_surface(a.surfaces[i], b.surfaces[i])) return false;
    }
    return true;
}

// Stand-alone reimplementation of the per-cell hash.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

TEST(CellTemplate, DefaultParametersAreValid) {
    EXPECT_NO_THROW(build_appendix_cell(12, 0.05, 0.55, 1200, HoleSpec{0.1, 0.2, 0.2}));
    const CellConfig cell = build_cell(CellParameters{}, 0);
    int cigars = 0, bulkhead = 0, facets = 0, sides = 0, gates = 0;
    for (const Surface& s : cell.surfaces) {
        if (s.kind == SurfaceKind::Cigar) ++cigars;
        if (s.kind == SurfaceKind::BulkheadFace) ++bulkhead;
        if (s.kind == SurfaceKind::GatePlane) ++gates;
        if (s.kind == SurfaceKind::Plane && (s.id.scatterer == scatterer::kFacetLeft ||
                                             s.id.scatterer == scatterer::kFacetRight))
            ++facets;
        if (s.kind == SurfaceKind::Plane && s.id.scatterer >= scatterer::kSideFirst &&
            s.id.scatterer < scatterer::kSideFirst + 4)
            ++sides;
    }
    EXPECT_EQ(cigars, 4);
    EXPECT_EQ(bulkhead, 2);
    EXPECT_EQ(facets, 2);
    EXPECT_EQ(sides, 4);
    EXPECT_EQ(gates, 2);
    EXPECT_EQ(cell.dispersing().size(), 4u);
}

TEST(CellTemplate, RhoAtOneHalfIsRejected) {
    CellParameters p;
    p.rho = 0.5;
    EXPECT_THROW(CellTemplate{p}, InvalidGeometry);
    EXPECT_NE(geometry_error(p).find("1/2 < rho"), std::string::npos);
}

TEST(CellTemplate, RhoAboveDiamondLimitIsRejected) {
    CellParameters p;
    p.rho = 0.68;
    ASSERT_LT((1 - 0.05) / std::sqrt(2.0), 0.68);
    EXPECT_NE(geometry_error(p).find("rho < (1-g)/sqrt(2)"), std::string::npos);
}

TEST(CellTemplate, ValidationMessagesNameTheConstraint) {
    CellParameters p;
    p.h = 9;
    EXPECT_NE(geometry_error(p).find("h > 10"), std::string::npos);
    p = {};
    p.g = 0.1;
    EXPECT_NE(geometry_error(p).find("g < 0.1"), std::string::npos);
    p = {};
    p.r_long = 1199;
    EXPECT_NE(geometry_error(p).find("R_long >= 100 h"), std::string::npos);
    p = {};
    p.hole.offset_u = 0;
    p.hole.offset_v = 0;
    EXPECT_NE(geometry_error(p).find("off-center"), std::string::npos);
}

TEST(CellTemplate, PresetsValidate) {
    for (const char* name : {"appendix", "cylindrical", "empty", "flat"}) {
        EXPECT_NO_THROW(CellTemplate{preset_parameters(parse_preset(name))}) << name;
    }
    EXPECT_THROW(parse_preset("hexagonal"), ConfigError);
}

TEST(DerivedConstants, DefaultCellMatchesIndependentEvaluation) {
    const DerivedConstants c = derived_constants(build_appendix_cell(12, 0.05, 0.55, 1200, {}));

    using boost::multiprecision::acos;
    using boost::multiprecision::ceil;
    using boost::multiprecision::cos;
    using boost::multiprecision::sin;
    using boost::multiprecision::sqrt;
    const HighReal pi = boost::math::constants::pi<HighReal>();
    const HighReal h = 12, rho = HighReal(55) / 100;
    const HighReal gamma = acos(1 / (2 * rho));
    const HighReal M = ceil(pi / gamma);
    const HighReal L1 = 1 / sqrt(HighReal(2)) - rho;
    const HighReal L2 = 2 * h * M;
    const HighReal L3 = 3 * h / sqrt(1 - HighReal(1) / 10000);
    const HighReal L = 2 * (L2 + L3);
    const HighReal K3 = ceil(L / L1) * M + ceil(3 * L / h);
    const HighReal eta = pi / 2 - acos(sin(gamma / 2) / 100);
    const HighReal eps = cos(pi / 2 - eta);

    auto rel = [](double got, const HighReal& want) {
        return std::abs(got - static_cast<double>(want)) / std::abs(static_cast<double>(want));
    };
    EXPECT_LE(rel(c.gamma, gamma), 1e-9);
    EXPECT_LE(rel(c.L1, L1), 1e-9);
    EXPECT_LE(rel(c.L2, L2), 1e-9);
    EXPECT_LE(rel(c.L3, L3), 1e-9);
    EXPECT_LE(rel(c.L, L), 1e-9);
    EXPECT_LE(rel(c.eta, eta), 1e-9);
    EXPECT_LE(rel(c.eps, eps), 1e-9);
    EXPECT_EQ(c.M, static_cast<std::int64_t>(M));
    EXPECT_EQ(c.K3, static_cast<std::int64_t>(K3));

    // Literal values.
    EXPECT_NEAR(c.gamma, 0.42970, 5e-6);
    EXPECT_EQ(c.M, 8);
    EXPECT_NEAR(c.L1, 0.157107, 5e-7);
    EXPECT_EQ(c.L2, 192);
    EXPECT_NEAR(c.L3, 36.0018, 5e-5);
    EXPECT_NEAR(c.L, 456.0036, 5e-5);
    EXPECT_EQ(c.K3, 2903 * 8 + 115);
    EXPECT_EQ(c.K3, 23339);
}

TEST(DerivedConstants, FormulaIdentitiesHoldForRandomValidTemplates) {
    Rng rng(11);
    int checked = 0;
    for (int i = 0; i < 2000 && checked < 200; ++i) {
        CellParameters p;
        p.h = rng.uniform(10.5, 30);
        p.g = rng.uniform(0.01, 0.09);
        p.rho = rng.uniform(0.5, (1 - p.g) / std::sqrt(2.0));
        p.r_long = 100 * p.h * rng.uniform(1, 3);
        if (!geometry_error(p).empty()) continue;
        ++checked;
        const DerivedConstants c = derived_constants(CellTemplate(p));
        EXPECT_DOUBLE_EQ(std::cos(c.gamma), 1 / (2 * p.rho));
        EXPECT_EQ(c.M, static_cast<std::int64_t>(std::ceil(M_PI / c.gamma)));
        EXPECT_DOUBLE_EQ(c.L1, 1 / std::sqrt(2.0) - p.rho);
        EXPECT_DOUBLE_EQ(c.L2, 2 * p.h * c.M);
        EXPECT_DOUBLE_EQ(c.L3, 3 * p.h / std::sqrt(1 - 1e-4));
        EXPECT_DOUBLE_EQ(c.L, 2 * (c.L2 + c.L3));
        EXPECT_EQ(c.K3, static_cast<std::int64_t>(std::ceil(c.L / c.L1)) * c.M +
                            static_cast<std::int64_t>(std::ceil(3 * c.L / p.h)));
        EXPECT_NEAR(c.eps, 1e-2 * std::sin(c.gamma / 2), 1e-15);
    }
    EXPECT_GE(checked, 100);
}

TEST(QuenchedTube, ZeroPerturbationGivesPeriodicTube) {
    TubeConfig cfg;
    cfg.seed = 5;
    const QuenchedTube tube(cfg);
    const CellConfig ref = build_cell(cfg.cell, 0);
    for (std::int64_t n = -5; n <= 5; ++n) {
        const CellConfig& c = tube.cell(n);
        EXPECT_EQ(c.n, n);
        EXPECT_TRUE(c.omega == cfg.cell);
        ASSERT_EQ(c.surfaces.size(), ref.surfaces.size());
        for (std::size_t i = 0; i < ref.surfaces.size(); ++i) {
            Surface s = ref.surfaces[i];
            s.id.cell = n;
            EXPECT_TRUE(same_surface(c.surfaces[i], s));
        }
    }
}

TEST(QuenchedTube, SameSeedAndIndexGiveBitIdenticalCells) {
    TubeConfig cfg;
    cfg.seed = 42;
    cfg.perturbation = 0.01;
    const QuenchedTube a(cfg);
    const QuenchedTube b(cfg);
    EXPECT_TRUE(same_cell(a.cell(7), b.cell(7)));
    EXPECT_TRUE(same_cell(realize_cell(a, 7), realize_cell(a, 7)));
    EXPECT_FALSE(a.cell(7).omega == a.cell(8).omega);
    TubeConfig other = cfg;
    other.seed = 43;
    EXPECT_FALSE(QuenchedTube(other).cell(7).omega == a.cell(7).omega);
}

TEST(QuenchedTube, PerturbationStaysWithinMagnitude) {
    TubeConfig cfg;
    cfg.seed = 3;
    cfg.perturbation = 0.01;
    const QuenchedTube tube(cfg);
    for (std::int64_t n = -20; n <= 20; ++n) {
        const CellParameters& p = tube.cell(n).omega;
        EXPECT_LE(std::abs(p.rho - cfg.cell.rho), 0.01);
        EXPECT_GE(p.r_long, cfg.cell.r_long);
        EXPECT_LE(p.r_long, cfg.cell.r_long * 1.01);
        for (const Vec2& o : p.axis_offsets) {
            EXPECT_LE(std::abs(o.u), 0.01);
            EXPECT_LE(std::abs(o.v), 0.01);
        }
        EXPECT_LE(std::abs(p.hole.offset_u - cfg.cell.hole.offset_u), 0.01);
        EXPECT_LE(std::abs(p.hole.offset_v - cfg.cell.hole.offset_v), 0.01);
    }
}

TEST(QuenchedTube, ValidatedThresholdHoldsForThousandCells) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        TubeConfig cfg;
        cfg.seed = seed;
        cfg.perturbation = 0.01;
        const QuenchedTube tube(cfg);
        for (std::int64_t n = -50; n < 50; ++n) {
            EXPECT_NO_THROW(validate_cell(realize_cell(tube, n).omega)) << "seed " << seed << " cell " << n;
        }
    }
}

TEST(QuenchedTube, TooLargePerturbationIsReported) {
    TubeConfig cfg;
    cfg.seed = 1;
    cfg.perturbation = 0.2;
    const QuenchedTube tube(cfg);
    int bad = 0;
    for (std::int64_t n = 0; n < 50; ++n) {
        try {
            tube.cell(n);
        } catch (const InvalidGeometry& e) {
            ++bad;
            EXPECT_NE(std::string(e.what()).find("cell " + std::to_string(n)), std::string::npos);
        }
    }
    EXPECT_GT(bad, 0);
}

TEST(QuenchedTube, FiniteOmegaIndicesMatchHashOracle) {
    TubeConfig cfg;
    cfg.seed = 1;
    cfg.mode = TubeMode::FiniteOmega;
    CellParameters second;
    second.rho = 0.56;
    cfg.templates = {CellParameters{}, second};
    const QuenchedTube tube(cfg);
    std::vector<int> got, want;
    for (std::int64_t n = -3; n <= 3; ++n) {
        got.push_back(tube.cell(n).template_index);
        const std::uint64_t a = mix(1);
        const std::uint64_t b = mix(a ^ static_cast<std::uint64_t>(n));
        want.push_back(static_cast<int>(mix(b + 0xF1) % 2));
    }
    EXPECT_EQ(got, want);
    for (std::int64_t n = -3; n <= 3; ++n) {
        EXPECT_TRUE(tube.cell(n).omega == cfg.templates[tube.cell(n).template_index]);
    }
}

TEST(QuenchedTube, TranslationConsistency) {
    TubeConfig cfg;
    cfg.seed = 9;
    cfg.perturbation = 0.01;
    const QuenchedTube tube(cfg);
    for (std::int64_t n : {-7, -1, 0, 3, 1000}) {
        const CellConfig& c = tube.cell(n);
        const CellConfig origin = build_cell(c.omega, 0);
        const std::vector<Surface> world = c.world_surfaces();
        const Vec3 tau{static_cast<double>(n) * c.h(), 0, 0};
        ASSERT_EQ(world.size(), origin.surfaces.size());
        for (std::size_t i = 0; i < world.size(); ++i) {
            Surface s = translated(origin.surfaces[i], tau);
            s.id.cell = n;
            EXPECT_TRUE(same_surface(world[i], s)) << "cell " << n << " surface " << i;
        }
    }
}

TEST(QuenchedTube, ConcurrentReadersShareOneRealization) {
    TubeConfig cfg;
    cfg.seed = 4;
    cfg.perturbation = 0.01;
    const QuenchedTube tube(cfg);
    std::vector<const CellConfig*> seen(8, nullptr);
    std::vector<std::thread> pool;
    for (int w = 0; w < 8; ++w) {
        pool.emplace_back([&, w] {
            for (std::int64_t n = 0; n < 200; ++n) tube.cell(n);
            seen[w] = &tube.cell(17);
        });
    }
    for (auto& t : pool) t.join();
    for (const CellConfig* p : seen) EXPECT_EQ(p, seen[0]);
    EXPECT_TRUE(same_cell(*seen[0], realize_cell(tube, 17)));
}

TEST(TubeConfig, SerializeParseRoundTripIsExact) {
    std::vector<TubeConfig> configs(4);
    configs[1].seed = 0xFFFFFFFFFFFFFFFFULL;
    configs[1].perturbation = 0.1 / 3;
    configs[1].cell.rho = 0.5512345678901234;
    configs[2].cell = preset_parameters(TemplatePreset::Cylindrical);
    configs[2].validate = false;
    configs[3].mode = TubeMode::FiniteOmega;
    configs[3].templates = {CellParameters{}, preset_parameters(TemplatePreset::Flat)};
    configs[3].templates[1].axis_offsets[2] = {1e-17, -3.3e-3};
    for (const TubeConfig& c : configs) {
        const TubeConfig back = parse_tube_config(serialize(c));
        EXPECT_TRUE(back == c);
        EXPECT_EQ(serialize(back), serialize(c));
    }
}

TEST(TubeConfig, MalformedTextIsAConfigError) {
    EXPECT_THROW(parse_tube_config(""), ConfigError);
    EXPECT_THROW(parse_tube_config("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_tube_config(R"({"cell": {"rho": "wide"}})"), ConfigError);
    EXPECT_THROW(parse_tube_config(R"({"mode": "chaotic"})"), ConfigError);
    EXPECT_THROW(parse_tube_config(R"({"cell": {"axis_offsets": [[0, 0]]}})"), ConfigError);
    EXPECT_THROW(parse_tube_config(R"({"seed": "x"})"), ConfigError);
}

TEST(TubeConfig, NegativePerturbationIsRejected) {
    TubeConfig cfg;
    cfg.perturbation = -0.1;
    EXPECT_THROW(QuenchedTube{cfg}, ConfigError);
}
