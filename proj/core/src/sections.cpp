#include "ltube/sections.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ltube/errors.hpp"

namespace ltube {

const char* to_string(SectionKind k) {
    switch (k) {
        case SectionKind::M: return "M";
        case SectionKind::N: return "N";
        case SectionKind::D: return "D";
    }
    return "?";
}

const char* to_string(ReturnStatus s) {
    switch (s) {
        case ReturnStatus::Returned: return "Returned";
        case ReturnStatus::SingularTangential: return "SingularTangential";
        case ReturnStatus::SingularEdge: return "SingularEdge";
        case ReturnStatus::SectionBoundary: return "SectionBoundary";
        case ReturnStatus::Budget: return "Budget";
    }
    return "?";
}

FlowState SectionPoint::state() const {
    FlowState s;
    s.x = x;
    s.cell = id.cell;
    s.last_surface = section == SectionKind::N ? -1 : surface_index;
    // the same nudge the flow applies after an event, so that resuming from a
    // returned point continues the underlying trajectory bit for bit
    s.x.q += kNudge * s.x.v;
    s.add_time(kNudge);
    return s;
}

SectionPoint gate_point(const CellConfig& cell, int gate, const LineElement& x) {
    const int sc = gate == 1 ? scatterer::kGateLeft : scatterer::kGateRight;
    SectionPoint p;
    p.section = SectionKind::N;
    p.surface_index = cell.find(sc);
    p.id = {cell.n, sc, 0};
    p.x = x;
    p.cos_out = gate == 1 ? x.v.x : -x.v.x;
    return p;
}

SectionPoint surface_point(const CellConfig& cell, SectionKind kind, int surface_index, const Vec3& q,
                           const Vec3& v) {
    const Surface& s = cell.surfaces.at(surface_index);
    SectionPoint p;
    p.section = kind;
    p.id = s.id;
    p.surface_index = surface_index;
    p.x = {q, v};
    p.cos_out = dot(v, surface_normal(s, q));
    return p;
}

namespace {

// Surface indices making up the base set of a section.
std::vector<int> section_pieces(const CellConfig& cell, const SectionSpec& spec) {
    std::vector<int> out;
    for (int m : spec.members) {
        if (spec.kind == SectionKind::N) {
            if (m != 1 && m != 2) throw InvalidSection("gate number must be 1 or 2");
            const int i = cell.find(m == 1 ? scatterer::kGateLeft : scatterer::kGateRight);
            out.push_back(i);
            continue;
        }
        bool found = false;
        for (int i = 0; i < static_cast<int>(cell.surfaces.size()); ++i) {
            const Surface& s = cell.surfaces[i];
            if (s.id.scatterer != m || s.transparent()) continue;
            if (spec.kind == SectionKind::M && !s.dispersing)
                throw InvalidSection("M sections live on dispersing scatterers only");
            out.push_back(i);
            found = true;
        }
        if (!found) throw InvalidSection("scatterer " + std::to_string(m) + " is absent from the cell");
    }
    if (out.empty()) throw InvalidSection("section has no base pieces");
    if (spec.kind == SectionKind::M && !(spec.eps >= 0 && spec.eps < 1))
        throw InvalidSection("M section needs 0 <= eps < 1 (the velocity cap v.o >= eps is empty)");
    return out;
}

constexpr double kTwoPi = 2 * M_PI;

struct RevolutionSampler {
    const RevolutionPatch* r;
    double w_max;

    explicit RevolutionSampler(const RevolutionPatch& rp) : r(&rp), w_max(0) {
        for (int k = 0; k <= 64; ++k) w_max = std::max(w_max, weight(rp.s_min + (rp.s_max - rp.s_min) * k / 64.0));
        w_max *= 1.001;
    }
    double weight(double s) const {
        const double u = s - r->s_center;
        const double sl = r->slope(u);
        return r->radius(u) * std::sqrt(1 + sl * sl);
    }
    Vec3 point(double s, double phi) const {
        const double rad = r->radius(s - r->s_center);
        return r->axis_point + s * r->axis + rad * (std::cos(phi) * r->e1 + std::sin(phi) * r->e2);
    }
    double bounding_area() const { return (r->s_max - r->s_min) * kTwoPi * w_max; }
};

struct PlanarBox {
    Vec2 lo{1e300, 1e300};
    Vec2 hi{-1e300, -1e300};

    explicit PlanarBox(const PlanarPatch& pl) {
        for (const Vec2& v : pl.outer.vertices) {
            lo = {std::min(lo.u, v.u), std::min(lo.v, v.v)};
            hi = {std::max(hi.u, v.u), std::max(hi.v, v.v)};
        }
    }
    double area() const { return (hi.u - lo.u) * (hi.v - lo.v); }
};

bool inside_box(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    return p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y && p.z <= hi.z;
}

// True when q on piece `index` bounds the free region.
bool on_boundary(const CellConfig& cell, int index, const Vec3& q) {
    const Surface& s = cell.surfaces[index];
    if (!inside_box(q, s.clip_lo, s.clip_hi)) return false;
    if (const auto* pl = s.planar()) {
        const Vec2 uv = pl->coords(q);
        if (!pl->outer.contains(uv)) return false;
        for (const ConvexPolygon& h : pl->holes)
            if (h.contains(uv)) return false;
    }
    for (int j = 0; j < static_cast<int>(cell.surfaces.size()); ++j) {
        if (j == index) continue;
        if (const auto* r = cell.surfaces[j].revolution()) {
            if (revolution_gap(*r, q) <= 0) return false;
        }
    }
    return true;
}

double piece_bounding_area(const Surface& s) {
    if (const auto* r = s.revolution()) return RevolutionSampler(*r).bounding_area();
    return PlanarBox(*s.planar()).area();
}

}  // namespace

std::vector<SectionPoint> sample_measure(const QuenchedTube& tube, const SectionSpec& spec, std::int64_t count,
                                         Rng& rng) {
    return sample_measure(tube.cell(spec.cell), spec, count, rng);
}

std::vector<SectionPoint> sample_measure(const CellConfig& cell, const SectionSpec& spec, std::int64_t count,
                                         Rng& rng) {
    const std::vector<int> pieces = section_pieces(cell, spec);
    std::vector<double> cumulative;
    std::vector<std::optional<RevolutionSampler>> samplers;
    double total = 0;
    for (int i : pieces) {
        const Surface& s = cell.surfaces[i];
        samplers.push_back(s.revolution() ? std::optional<RevolutionSampler>(*s.revolution()) : std::nullopt);
        total += piece_bounding_area(s);
        cumulative.push_back(total);
    }

    std::vector<SectionPoint> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
    std::int64_t misses = 0;
    while (static_cast<std::int64_t>(out.size()) < count) {
        if (misses > 10'000'000) throw InvalidSection("base set of the section has (numerically) zero area");
        // Rejection over the union: piece by bounding area, then point.
        const double pick = rng.uniform() * total;
        const std::size_t k =
            std::min<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
                                  pieces.size() - 1);
        const int index = pieces[k];
        const Surface& s = cell.surfaces[index];
        Vec3 q;
        if (const auto& rs = samplers[k]) {
            const double sv = rng.uniform(rs->r->s_min, rs->r->s_max);
            const double phi = kTwoPi * rng.uniform();
            if (rng.uniform() * rs->w_max > rs->weight(sv)) {
                ++misses;
                continue;
            }
            q = rs->point(sv, phi);
        } else {
            const PlanarPatch& pl = *s.planar();
            const PlanarBox box(pl);
            q = pl.point({rng.uniform(box.lo.u, box.hi.u), rng.uniform(box.lo.v, box.hi.v)});
        }
        if (!on_boundary(cell, index, q)) {
            ++misses;
            continue;
        }
        misses = 0;

        const Vec3 n = surface_normal(s, q);
        Vec3 v = cosine_weighted(n, rng);
        if (spec.kind == SectionKind::M) {
            while (dot(v, n) < spec.eps) v = cosine_weighted(n, rng);
        }
        SectionPoint p;
        p.section = spec.kind;
        p.id = s.id;
        p.surface_index = index;
        p.x = {q, v};
        p.cos_out = dot(v, n);
        out.push_back(p);
    }
    return out;
}

double section_area(const QuenchedTube& tube, const SectionSpec& spec, int resolution) {
    const CellConfig& cell = tube.cell(spec.cell);
    const std::vector<int> pieces = section_pieces(cell, spec);
    const int nr = std::max(resolution, 4);
    double area = 0;
    for (int index : pieces) {
        const Surface& s = cell.surfaces[index];
        double piece = 0;
        if (const auto* r = s.revolution()) {
            const RevolutionSampler rs(*r);
            const double ds = (r->s_max - r->s_min) / nr;
            const double dphi = kTwoPi / nr;
            for (int i = 0; i < nr; ++i) {
                const double sv = r->s_min + (i + 0.5) * ds;
                const double w = rs.weight(sv);
                for (int j = 0; j < nr; ++j) {
                    if (on_boundary(cell, index, rs.point(sv, (j + 0.5) * dphi))) piece += w * ds * dphi;
                }
            }
        } else {
            const PlanarPatch& pl = *s.planar();
            const PlanarBox box(pl);
            const double du = (box.hi.u - box.lo.u) / nr;
            const double dv = (box.hi.v - box.lo.v) / nr;
            for (int i = 0; i < nr; ++i) {
                for (int j = 0; j < nr; ++j) {
                    const Vec3 q = pl.point({box.lo.u + (i + 0.5) * du, box.lo.v + (j + 0.5) * dv});
                    if (on_boundary(cell, index, q)) piece += du * dv;
                }
            }
        }
        area += piece;
    }
    return area;
}

double section_measure(const QuenchedTube& tube, const SectionSpec& spec, int resolution) {
    const double cap = spec.kind == SectionKind::M ? M_PI * (1 - spec.eps * spec.eps) : M_PI;
    return section_area(tube, spec, resolution) * cap;
}

MWalk walk_M(const QuenchedTube& tube, const SectionPoint& p, double eps, std::int64_t event_budget,
             bool record_itinerary) {
    MWalk w;
    if (std::abs(p.cos_out - eps) < kSectionBoundaryThreshold && p.section == SectionKind::M) {
        w.status = ReturnStatus::SectionBoundary;
        return w;
    }
    FlowState s = p.state();
    const CellConfig* cell = &tube.cell(s.cell);
    for (std::int64_t k = 0; k < event_budget; ++k) {
        const CollisionEvent ev = next_event(*cell, s);
        ++w.ret.events;
        if (record_itinerary) w.itinerary.push_back({ev.surface, ev.kind});
        if (ev.kind == EventKind::SingularTangential) {
            w.status = ReturnStatus::SingularTangential;
            return w;
        }
        if (ev.kind == EventKind::SingularEdge) {
            w.status = ReturnStatus::SingularEdge;
            return w;
        }
        s = ev.after;
        if (ev.kind == EventKind::GateCrossing) {
            cell = &tube.cell(s.cell);
            continue;
        }
        ++w.ret.collisions;
        if (ev.kind != EventKind::Dispersing) continue;
        const double c = dot(s.x.v, ev.hit.normal);
        if (std::abs(c - eps) < kSectionBoundaryThreshold) {
            w.status = ReturnStatus::SectionBoundary;
            return w;
        }
        if (c >= eps) {
            w.status = ReturnStatus::Returned;
            w.ret.time = ev.before.time;
            SectionPoint& out = w.ret.point;
            out.section = SectionKind::M;
            out.id = ev.surface;
            out.surface_index = ev.surface_index;
            out.x = {ev.before.x.q, s.x.v};
            out.cos_out = c;
            return w;
        }
    }
    w.status = ReturnStatus::Budget;
    return w;
}

SectionReturn poincare_M(const QuenchedTube& tube, const SectionPoint& p, double eps, std::int64_t event_budget) {
    MWalk w = walk_M(tube, p, eps, event_budget, false);
    if (w.status != ReturnStatus::Returned)
        throw SingularOrbit(std::string("M return failed: ") + to_string(w.status));
    return w.ret;
}

SectionReturn poincare_N(const QuenchedTube& tube, const SectionPoint& p, std::int64_t collision_budget) {
    FlowState s = p.state();
    const CellConfig* cell = &tube.cell(s.cell);
    SectionReturn r;
    for (;;) {
        const CollisionEvent ev = next_event(*cell, s);
        ++r.events;
        if (is_singular(ev.kind)) throw SingularOrbit(std::string("N return met a ") + to_string(ev.kind) + " event");
        if (ev.kind == EventKind::GateCrossing) {
            const CellConfig& next = tube.cell(ev.after.cell);
            LineElement x = ev.before.x;
            x.q.x -= ev.exit_sign * cell->h();
            r.point = gate_point(next, ev.exit_sign > 0 ? 1 : 2, x);
            r.exit_sign = ev.exit_sign;
            r.time = ev.before.time;
            return r;
        }
        ++r.collisions;
        if (r.collisions >= collision_budget) throw NotExited(collision_budget);
        s = ev.after;
    }
}

std::optional<SectionReturn> first_return_D(const QuenchedTube& tube, const SectionSpec& D, const SectionPoint& p,
                                            std::int64_t collision_budget, bool any_cell) {
    if (D.kind != SectionKind::D) throw InvalidSection("first_return_D needs a D section");
    FlowState s = p.state();
    const CellConfig* cell = &tube.cell(s.cell);
    SectionReturn r;
    while (r.collisions < collision_budget) {
        const CollisionEvent ev = next_event(*cell, s);
        ++r.events;
        if (is_singular(ev.kind)) throw SingularOrbit(std::string("D return met a ") + to_string(ev.kind) + " event");
        s = ev.after;
        if (ev.kind == EventKind::GateCrossing) {
            cell = &tube.cell(s.cell);
            continue;
        }
        ++r.collisions;
        if ((any_cell || ev.surface.cell == D.cell) &&
            std::find(D.members.begin(), D.members.end(), ev.surface.scatterer) != D.members.end()) {
            r.time = ev.before.time;
            SectionPoint& out = r.point;
            out.section = SectionKind::D;
            out.id = ev.surface;
            out.surface_index = ev.surface_index;
            out.x = {ev.before.x.q, s.x.v};
            out.cos_out = dot(s.x.v, ev.hit.normal);
            return r;
        }
    }
    return std::nullopt;
}

}  // namespace ltube
