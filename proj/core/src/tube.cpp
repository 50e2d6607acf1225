#include "ltube/tube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "json.hpp"

#include "ltube/errors.hpp"
#include "ltube/rng.hpp"

namespace ltube {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

const std::array<Vec2, 4> kCorners{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

Vec2 axis_yz(const CellParameters& p, int i) {
    return {kCorners[i].u + p.axis_offsets[i].u, kCorners[i].v + p.axis_offsets[i].v};
}

double dist2d(Vec2 a, Vec2 b) { return std::hypot(a.u - b.u, a.v - b.v); }

// Smallest cigar radius over [0, h].
double end_radius(const CellParameters& p) {
    RevolutionPatch r;
    r.rho = p.rho;
    r.r_long = p.r_long;
    return r.radius(p.h / 2);
}

Vec3 bulkhead_center(const CellParameters& p) { return {p.h / 2, 0.5, 0.5}; }
Vec3 bulkhead_normal() { return normalized(Vec3{1, 1, 1}); }

// In-plane face frame of the bulkhead. The default hole (offset (0.2, 0.2))
// then sits on the z-arm of the transverse diamond, clear of the gate shadow.
std::pair<Vec3, Vec3> bulkhead_frame() {
    const Vec3 a = normalized(Vec3{-1, 0, 1});
    const Vec3 b = normalized(Vec3{1, -2, 1});
    const double s = 1 / std::sqrt(2.0);
    return {s * (a + b), s * (a - b)};
}

PlanarPatch bulkhead_patch(const CellParameters& p, double sign) {
    PlanarPatch pl;
    pl.origin = bulkhead_center(p);
    pl.normal = sign * bulkhead_normal();
    std::tie(pl.e1, pl.e2) = bulkhead_frame();
    // The plane meets the box in the image of the transverse unit square.
    const double c = p.h / 2 + 1;
    std::vector<Vec2> verts;
    for (const Vec2& k : kCorners) verts.push_back(pl.coords({c - k.u - k.v, k.u, k.v}));
    double area = 0;
    for (std::size_t i = 0; i < verts.size(); ++i) {
        const Vec2 a = verts[i];
        const Vec2 b = verts[(i + 1) % verts.size()];
        area += a.u * b.v - b.u * a.v;
    }
    if (area < 0) std::reverse(verts.begin(), verts.end());
    pl.outer.vertices = verts;
    pl.holes.push_back(ConvexPolygon::square({p.hole.offset_u, p.hole.offset_v}, p.hole.side));
    return pl;
}

// Transverse (y, z) footprint of the bulkhead hole, counter-clockwise.
ConvexPolygon hole_shadow(const CellParameters& p) {
    const PlanarPatch pl = bulkhead_patch(p, 1.0);
    ConvexPolygon out;
    for (const Vec2& uv : pl.holes.front().vertices) {
        const Vec3 q = pl.point(uv);
        out.vertices.push_back({q.y, q.z});
    }
    double area = 0;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
        const Vec2 a = out.vertices[i];
        const Vec2 b = out.vertices[(i + 1) % out.vertices.size()];
        area += a.u * b.v - b.u * a.v;
    }
    if (area < 0) std::reverse(out.vertices.begin(), out.vertices.end());
    return out;
}

ConvexPolygon gate_square(const CellParameters& p) { return ConvexPolygon::square({0.5, 0.5}, p.g); }

void require(bool ok, const std::string& constraint) {
    if (!ok) throw InvalidGeometry("violated constraint: " + constraint);
}

}  // namespace

bool operator==(const CellParameters& a, const CellParameters& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    if (!(same(a.h, b.h) && same(a.g, b.g) && same(a.rho, b.rho) && same(a.r_long, b.r_long) &&
          a.hole == b.hole && a.cigars == b.cigars && a.bulkhead == b.bulkhead))
        return false;
    for (int i = 0; i < 4; ++i) {
        if (a.axis_offsets[i].u != b.axis_offsets[i].u || a.axis_offsets[i].v != b.axis_offsets[i].v)
            return false;
    }
    return true;
}

CellParameters preset_parameters(TemplatePreset preset) {
    CellParameters p;
    switch (preset) {
        case TemplatePreset::Appendix: break;
        case TemplatePreset::Cylindrical:
            p.r_long = kInf;
            p.bulkhead = false;
            break;
        case TemplatePreset::Empty:
            p.cigars = false;
            p.bulkhead = false;
            break;
        case TemplatePreset::Flat: p.cigars = false; break;
    }
    return p;
}

TemplatePreset parse_preset(const std::string& name) {
    if (name == "appendix") return TemplatePreset::Appendix;
    if (name == "cylindrical") return TemplatePreset::Cylindrical;
    if (name == "empty") return TemplatePreset::Empty;
    if (name == "flat") return TemplatePreset::Flat;
    throw ConfigError("unknown template '" + name + "' (expected appendix|cylindrical|empty|flat)");
}

//---------------------------------------------------------------------------//
// Validation

void validate_cell(const CellParameters& p) {
    require(std::isfinite(p.h) && p.h > 10, "h > 10 (got h = " + fmt(p.h) + ")");
    require(std::isfinite(p.g) && p.g > 0 && p.g < 0.1, "0 < g < 0.1 (got g = " + fmt(p.g) + ")");
    const double rho_max = (1 - p.g) / std::sqrt(2.0);

    if (p.cigars) {
        require(std::isfinite(p.rho) && p.rho > 0.5, "1/2 < rho (got rho = " + fmt(p.rho) + ")");
        require(p.rho < rho_max, "rho < (1-g)/sqrt(2) = " + fmt(rho_max) + " (got rho = " +
                                     fmt(p.rho) + ")");
        require(!std::isnan(p.r_long) && p.r_long >= 100 * p.h,
                "R_long >= 100 h (got R_long = " + fmt(p.r_long) + ")");
        const double r_end = end_radius(p);
        require(r_end > 0.5, "1/2 < r(x) for all x in [0, h] (end radius " + fmt(r_end) + ")");

        // Adjacent cigars overlap everywhere, so the transverse section stays
        // a closed diamond; none of them covers part of a gate.
        for (int i = 0; i < 4; ++i) {
            const Vec2 ai = axis_yz(p, i);
            const Vec2 aj = axis_yz(p, (i + 1) % 4);
            require(dist2d(ai, aj) < 2 * r_end,
                    "adjacent cigars " + std::to_string(i) + "," + std::to_string((i + 1) % 4) +
                        " overlap along the whole cell");
            const ConvexPolygon gate = gate_square(p);
            double d = gate.boundary_distance(ai);
            if (gate.contains(ai)) d = 0;
            require(p.rho < d, "cigar " + std::to_string(i) + " does not obscure the gates");
        }
    }

    if (p.bulkhead) {
        require(std::isfinite(p.hole.side) && p.hole.side > 0, "bulkhead hole side > 0");
        const PlanarPatch face = bulkhead_patch(p, 1.0);
        for (const Vec2& v : face.holes.front().vertices) {
            require(face.outer.contains(v), "bulkhead hole lies inside the bulkhead");
        }
        require(!polygons_overlap(hole_shadow(p), gate_square(p)),
                "bulkhead hole is off-center: no collisionless trajectory joins the two gates");
        if (p.cigars) {
            const Vec3 c = face.point({p.hole.offset_u, p.hole.offset_v});
            const CellConfig cfg = build_cell(p, 0);
            require(cfg.is_free(c), "bulkhead hole center lies in the free region");
        }
    }
}

CellTemplate::CellTemplate(const CellParameters& p) : params_(p) { validate_cell(p); }

CellTemplate CellTemplate::unchecked(const CellParameters& p) { return CellTemplate(p, Unchecked{}); }

CellTemplate build_appendix_cell(double h, double g, double rho, double r_long, const HoleSpec& hole) {
    CellParameters p;
    p.h = h;
    p.g = g;
    p.rho = rho;
    p.r_long = r_long;
    p.hole = hole;
    return CellTemplate(p);
}

DerivedConstants derived_constants(const CellTemplate& t) {
    const CellParameters& p = t.parameters();
    DerivedConstants c;
    c.gamma = std::acos(1 / (2 * p.rho));
    c.M = static_cast<std::int64_t>(std::ceil(M_PI / c.gamma));
    c.L1 = 1 / std::sqrt(2.0) - p.rho;
    c.L2 = 2 * p.h * static_cast<double>(c.M);
    c.L3 = 3 * p.h / std::sqrt(1 - 1e-4);
    c.L = 2 * (c.L2 + c.L3);
    c.K3 = static_cast<std::int64_t>(std::ceil(c.L / c.L1)) * c.M +
           static_cast<std::int64_t>(std::ceil(3 * c.L / p.h));
    c.eta = M_PI / 2 - std::acos(1e-2 * std::sin(c.gamma / 2));
    c.eps = std::cos(M_PI / 2 - c.eta);
    return c;
}

//---------------------------------------------------------------------------//
// Cell realization

CellConfig build_cell(const CellParameters& p, std::int64_t n, int template_index) {
    CellConfig cell;
    cell.n = n;
    cell.omega = p;
    cell.template_index = template_index;
    const double h = p.h;
    const Vec3 lo{0, 0, 0};
    const Vec3 hi{h, 1, 1};
    auto& out = cell.surfaces;

    if (p.cigars) {
        for (int i = 0; i < 4; ++i) {
            const Vec2 a = axis_yz(p, i);
            out.push_back(make_revolution({n, i, 0}, {0, a.u, a.v}, {1, 0, 0}, p.rho, p.r_long, h / 2, 0,
                                          h, lo, hi));
        }
    }
    if (p.bulkhead) {
        out.push_back(make_bulkhead_face({n, scatterer::kBulkhead, 0}, bulkhead_patch(p, 1.0), lo, hi));
        out.push_back(make_bulkhead_face({n, scatterer::kBulkhead, 1}, bulkhead_patch(p, -1.0), lo, hi));
    }

    const ConvexPolygon unit = ConvexPolygon::rectangle({0, 0}, {1, 1});
    const ConvexPolygon gate = gate_square(p);
    auto facet = [&](double x, double nx) {
        PlanarPatch pl;
        pl.origin = {x, 0, 0};
        pl.normal = {nx, 0, 0};
        pl.e1 = {0, 1, 0};
        pl.e2 = {0, 0, 1};
        pl.outer = unit;
        return pl;
    };
    PlanarPatch left = facet(0, 1);
    PlanarPatch right = facet(h, -1);
    left.holes.push_back(gate);
    right.holes.push_back(gate);
    out.push_back(make_plane({n, scatterer::kFacetLeft, 0}, left, lo, hi));
    out.push_back(make_plane({n, scatterer::kFacetRight, 0}, right, lo, hi));

    // Side walls y = 0, y = 1, z = 0, z = 1, in (x, transverse) face coordinates.
    const ConvexPolygon side = ConvexPolygon::rectangle({0, 0}, {h, 1});
    const std::array<std::pair<Vec3, Vec3>, 4> sides{{{{0, 0, 0}, {0, 1, 0}},
                                                      {{0, 1, 0}, {0, -1, 0}},
                                                      {{0, 0, 0}, {0, 0, 1}},
                                                      {{0, 0, 1}, {0, 0, -1}}}};
    for (int k = 0; k < 4; ++k) {
        PlanarPatch pl;
        pl.origin = sides[k].first;
        pl.normal = sides[k].second;
        pl.e1 = {1, 0, 0};
        pl.e2 = k < 2 ? Vec3{0, 0, 1} : Vec3{0, 1, 0};
        pl.outer = side;
        out.push_back(make_plane({n, scatterer::kSideFirst + k, 0}, pl, lo, hi));
    }

    PlanarPatch g1 = facet(0, 1);
    PlanarPatch g2 = facet(h, -1);
    g1.outer = gate;
    g2.outer = gate;
    out.push_back(make_gate({n, scatterer::kGateLeft, 0}, g1, lo, hi));
    out.push_back(make_gate({n, scatterer::kGateRight, 0}, g2, lo, hi));

    for (int i = 0; i < static_cast<int>(out.size()); ++i) {
        const Surface& s = out[i];
        if (s.transparent()) continue;
        if (s.kind == SurfaceKind::BulkheadFace && s.id.piece == 1) continue;
        cell.solid_pieces.push_back(i);
    }
    return cell;
}

std::vector<Surface> CellConfig::world_surfaces() const {
    std::vector<Surface> out;
    const Vec3 shift{static_cast<double>(n) * h(), 0, 0};
    out.reserve(surfaces.size());
    for (const Surface& s : surfaces) out.push_back(translated(s, shift));
    return out;
}

int CellConfig::find(int scatterer_index, int piece) const {
    for (int i = 0; i < static_cast<int>(surfaces.size()); ++i) {
        if (surfaces[i].id.scatterer == scatterer_index && surfaces[i].id.piece == piece) return i;
    }
    return -1;
}

std::vector<int> CellConfig::dispersing() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(surfaces.size()); ++i) {
        if (surfaces[i].dispersing) out.push_back(i);
    }
    return out;
}

bool CellConfig::is_free(const Vec3& p) const {
    if (p.x < 0 || p.x > h() || p.y < 0 || p.y > 1 || p.z < 0 || p.z > 1) return false;
    for (const Surface& s : surfaces) {
        if (const auto* r = s.revolution()) {
            if (revolution_gap(*r, p) <= 0) return false;
        }
    }
    return true;
}

double CellConfig::seam_distance(const Vec3& p, int exclude_scatterer) const {
    double best = kInf;
    for (int i : solid_pieces) {
        const Surface& s = surfaces[i];
        if (s.id.scatterer == exclude_scatterer) continue;
        best = std::min(best, distance_to_surface(s, p));
    }
    return best;
}

//---------------------------------------------------------------------------//
// Quenched tube

QuenchedTube::QuenchedTube(TubeConfig config)
    : config_(std::move(config)),
      template_(config_.validate ? CellTemplate(config_.cell) : CellTemplate::unchecked(config_.cell)),
      constants_(derived_constants(template_)) {
    if (!(config_.perturbation >= 0) || !std::isfinite(config_.perturbation))
        throw ConfigError("perturbation magnitude must be finite and >= 0");
    if (config_.mode == TubeMode::FiniteOmega) {
        if (config_.templates.empty()) throw ConfigError("finite-omega mode needs at least one template");
        for (const CellParameters& t : config_.templates) {
            if (t.h != config_.cell.h || t.g != config_.cell.g)
                throw InvalidGeometry("violated constraint: all templates share h and g");
            if (config_.validate) validate_cell(t);
        }
    }
}

const CellConfig& QuenchedTube::cell(std::int64_t n) const {
    {
        std::shared_lock lock(mutex_);
        auto it = cache_.find(n);
        if (it != cache_.end()) return *it->second;
    }
    // Built outside the lock; a concurrent duplicate is identical and dropped.
    auto built = std::make_unique<const CellConfig>(realize_cell(*this, n));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = cache_.emplace(n, std::move(built));
    return *it->second;
}

CellConfig realize_cell(const QuenchedTube& tube, std::int64_t n) {
    const TubeConfig& c = tube.config();
    if (c.mode == TubeMode::FiniteOmega) {
        const auto k = static_cast<std::uint64_t>(c.templates.size());
        const int index = static_cast<int>(counter_hash(c.seed, n, draw::kTemplate) % k);
        return build_cell(c.templates[index], n, index);
    }

    CellParameters p = c.cell;
    const double mag = c.perturbation;
    if (mag > 0) {
        auto jitter = [&](std::uint64_t stream) {
            return mag * (2 * to_unit(counter_hash(c.seed, n, stream)) - 1);
        };
        p.rho += jitter(draw::kRho);
        // one-sided: the default R_long sits on the R_long >= 100 h bound
        if (std::isfinite(p.r_long)) p.r_long *= 1 + mag * to_unit(counter_hash(c.seed, n, draw::kRLong));
        for (int i = 0; i < 4; ++i) {
            p.axis_offsets[i].u += jitter(draw::kAxisFirst + 2 * i);
            p.axis_offsets[i].v += jitter(draw::kAxisFirst + 2 * i + 1);
        }
        p.hole.offset_u += jitter(draw::kHoleU);
        p.hole.offset_v += jitter(draw::kHoleV);
        if (c.validate) {
            try {
                validate_cell(p);
            } catch (const InvalidGeometry& e) {
                throw InvalidGeometry("cell " + std::to_string(n) + ": " + e.what());
            }
        }
    }
    return build_cell(p, n);
}

//---------------------------------------------------------------------------//
// Configuration text

namespace {

using nlohmann::json;

json real_to_json(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return x;
}

double real_from_json(const json& j, const char* key) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError(std::string("field '") + key + "' must be a number");
}

json cell_to_json(const CellParameters& p) {
    json offsets = json::array();
    for (const Vec2& o : p.axis_offsets) offsets.push_back({o.u, o.v});
    return json{{"h", real_to_json(p.h)},
                {"g", real_to_json(p.g)},
                {"rho", real_to_json(p.rho)},
                {"r_long", real_to_json(p.r_long)},
                {"hole", {{"side", p.hole.side}, {"offset_u", p.hole.offset_u}, {"offset_v", p.hole.offset_v}}},
                {"axis_offsets", offsets},
                {"cigars", p.cigars},
                {"bulkhead", p.bulkhead}};
}

CellParameters cell_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("cell parameters must be an object");
    CellParameters p;
    if (j.contains("template")) p = preset_parameters(parse_preset(j.at("template").get<std::string>()));
    if (j.contains("h")) p.h = real_from_json(j.at("h"), "h");
    if (j.contains("g")) p.g = real_from_json(j.at("g"), "g");
    if (j.contains("rho")) p.rho = real_from_json(j.at("rho"), "rho");
    if (j.contains("r_long")) p.r_long = real_from_json(j.at("r_long"), "r_long");
    if (j.contains("hole")) {
        const json& h = j.at("hole");
        if (h.contains("side")) p.hole.side = real_from_json(h.at("side"), "hole.side");
        if (h.contains("offset_u")) p.hole.offset_u = real_from_json(h.at("offset_u"), "hole.offset_u");
        if (h.contains("offset_v")) p.hole.offset_v = real_from_json(h.at("offset_v"), "hole.offset_v");
    }
    if (j.contains("axis_offsets")) {
        const json& a = j.at("axis_offsets");
        if (!a.is_array() || a.size() != 4) throw ConfigError("axis_offsets must hold 4 pairs");
        for (int i = 0; i < 4; ++i) {
            if (!a[i].is_array() || a[i].size() != 2) throw ConfigError("axis_offsets must hold 4 pairs");
            p.axis_offsets[i] = {real_from_json(a[i][0], "axis_offsets"), real_from_json(a[i][1], "axis_offsets")};
        }
    }
    if (j.contains("cigars")) p.cigars = j.at("cigars").get<bool>();
    if (j.contains("bulkhead")) p.bulkhead = j.at("bulkhead").get<bool>();
    return p;
}

}  // namespace

std::string serialize(const TubeConfig& c) {
    json templates = json::array();
    for (const CellParameters& t : c.templates) templates.push_back(cell_to_json(t));
    const json j{{"cell", cell_to_json(c.cell)},
                 {"seed", c.seed},
                 {"perturbation", real_to_json(c.perturbation)},
                 {"mode", c.mode == TubeMode::Perturbed ? "perturbed" : "finite-omega"},
                 {"templates", templates},
                 {"validate", c.validate}};
    return j.dump(2);
}

TubeConfig parse_tube_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed tube configuration: ") + e.what());
    }
    try {
        if (!j.is_object()) throw ConfigError("tube configuration must be an object");
        TubeConfig c;
        if (j.contains("cell")) c.cell = cell_from_json(j.at("cell"));
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("perturbation")) c.perturbation = real_from_json(j.at("perturbation"), "perturbation");
        if (j.contains("mode")) {
            const std::string m = j.at("mode").get<std::string>();
            if (m == "perturbed") {
                c.mode = TubeMode::Perturbed;
            } else if (m == "finite-omega") {
                c.mode = TubeMode::FiniteOmega;
            } else {
                throw ConfigError("mode must be 'perturbed' or 'finite-omega'");
            }
        }
        if (j.contains("templates")) {
            for (const json& t : j.at("templates")) c.templates.push_back(cell_from_json(t));
        }
        if (j.contains("validate")) c.validate = j.at("validate").get<bool>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed tube configuration: ") + e.what());
    }
}

}  // namespace ltube
