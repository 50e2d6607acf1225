#include "ltube/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "ltube/errors.hpp"
#include "ltube/precision.hpp"

namespace ltube {

const char* to_string(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::Plane: return "Plane";
        case SurfaceKind::Cylinder: return "Cylinder";
        case SurfaceKind::Cigar: return "Cigar";
        case SurfaceKind::BulkheadFace: return "BulkheadFace";
        case SurfaceKind::GatePlane: return "GatePlane";
    }
    return "?";
}

//---------------------------------------------------------------------------//
// Polygons

namespace {

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const double dx = b.u - a.u;
    const double dy = b.v - a.v;
    const double len2 = dx * dx + dy * dy;
    double s = len2 > 0 ? ((p.u - a.u) * dx + (p.v - a.v) * dy) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    const double ex = a.u + s * dx - p.u;
    const double ey = a.v + s * dy - p.v;
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

bool ConvexPolygon::contains(Vec2 p) const {
    const std::size_t n = vertices.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = vertices[i];
        const Vec2 b = vertices[(i + 1) % n];
        const double side = (b.u - a.u) * (p.v - a.v) - (b.v - a.v) * (p.u - a.u);
        if (side < 0) return false;
    }
    return true;
}

double ConvexPolygon::boundary_distance(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, segment_distance(p, vertices[i], vertices[(i + 1) % n]));
    }
    return best;
}

ConvexPolygon ConvexPolygon::square(Vec2 center, double side) {
    const double h = side / 2;
    return rectangle({center.u - h, center.v - h}, {center.u + h, center.v + h});
}

ConvexPolygon ConvexPolygon::rectangle(Vec2 lo, Vec2 hi) {
    return ConvexPolygon{{{lo.u, lo.v}, {hi.u, lo.v}, {hi.u, hi.v}, {lo.u, hi.v}}};
}

bool polygons_overlap(const ConvexPolygon& a, const ConvexPolygon& b) {
    auto separated_by_edges_of = [](const ConvexPolygon& p, const ConvexPolygon& q) {
        const std::size_t n = p.vertices.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 e0 = p.vertices[i];
            const Vec2 e1 = p.vertices[(i + 1) % n];
            // outward normal of a CCW edge
            const double nx = e1.v - e0.v;
            const double ny = -(e1.u - e0.u);
            const double p_max = nx * e0.u + ny * e0.v;
            bool all_outside = true;
            for (const Vec2& w : q.vertices) {
                if (nx * w.u + ny * w.v <= p_max) {
                    all_outside = false;
                    break;
                }
            }
            if (all_outside) return true;
        }
        return false;
    };
    return !separated_by_edges_of(a, b) && !separated_by_edges_of(b, a);
}

Vec2 PlanarPatch::coords(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {dot(d, e1), dot(d, e2)};
}

Vec3 PlanarPatch::point(Vec2 uv) const { return origin + uv.u * e1 + uv.v * e2; }

double RevolutionPatch::max_radius() const {
    if (straight() || r_long > 0) return rho;
    const double u = std::max(std::abs(s_min - s_center), std::abs(s_max - s_center));
    return radius(u);
}

double RevolutionPatch::min_radius() const {
    if (straight() || r_long < 0) return rho;
    const double u = std::max(std::abs(s_min - s_center), std::abs(s_max - s_center));
    return radius(u);
}

void Mat3::add_outer(double k, const Vec3& a) {
    const double c[3] = {a.x, a.y, a.z};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] += k * c[i] * c[j];
}

//---------------------------------------------------------------------------//
// Construction

Surface make_plane(SurfaceId id, const PlanarPatch& patch, Vec3 clip_lo, Vec3 clip_hi) {
    return Surface{SurfaceKind::Plane, id, false, patch, clip_lo, clip_hi};
}

Surface make_gate(SurfaceId id, const PlanarPatch& patch, Vec3 clip_lo, Vec3 clip_hi) {
    return Surface{SurfaceKind::GatePlane, id, false, patch, clip_lo, clip_hi};
}

Surface make_bulkhead_face(SurfaceId id, const PlanarPatch& patch, Vec3 clip_lo, Vec3 clip_hi) {
    return Surface{SurfaceKind::BulkheadFace, id, false, patch, clip_lo, clip_hi};
}

Surface make_revolution(SurfaceId id, Vec3 axis_point, Vec3 axis, double rho, double r_long,
                        double s_center, double s_min, double s_max, Vec3 clip_lo, Vec3 clip_hi) {
    RevolutionPatch r;
    r.axis_point = axis_point;
    r.axis = normalized(axis);
    r.e1 = any_orthogonal(r.axis);
    r.e2 = cross(r.axis, r.e1);
    r.rho = rho;
    r.r_long = r_long;
    r.s_center = s_center;
    r.s_min = s_min;
    r.s_max = s_max;
    const SurfaceKind kind = r.straight() ? SurfaceKind::Cylinder : SurfaceKind::Cigar;
    return Surface{kind, id, true, r, clip_lo, clip_hi};
}

Surface translated(const Surface& s, const Vec3& offset) {
    Surface out = s;
    if (auto* p = std::get_if<PlanarPatch>(&out.shape)) {
        p->origin += offset;
    } else if (auto* r = std::get_if<RevolutionPatch>(&out.shape)) {
        // the profile parameter s is measured from axis_point, so it is
        // unaffected by the shift
        r->axis_point += offset;
    }
    out.clip_lo += offset;
    out.clip_hi += offset;
    return out;
}

//---------------------------------------------------------------------------//
// Intersection

namespace {

template <class Real>
std::optional<HitT<Real>> intersect_planar(const PlanarPatch& pl, const LineElementT<Real>& x,
                                           const Real& t_min, const Real& t_max) {
    // Renormalized in Real: a normal that is unit only to double precision
    // makes the extended-precision reflection non-isometric.
    auto n = Vec3T<Real>::from(pl.normal);
    n = n / norm(n);
    const Real denom = dot(x.v, n);
    if (!(denom < 0)) return std::nullopt;
    const Real t = dot(Vec3T<Real>::from(pl.origin) - x.q, n) / denom;
    if (!(t > t_min) || t > t_max) return std::nullopt;

    HitT<Real> hit;
    hit.t = t;
    hit.point = x.q + t * x.v;
    const Vec3T<Real> rel = hit.point - Vec3T<Real>::from(pl.origin);
    const Vec2 uv{static_cast<double>(dot(rel, Vec3T<Real>::from(pl.e1))),
                  static_cast<double>(dot(rel, Vec3T<Real>::from(pl.e2)))};

    double border = pl.outer.boundary_distance(uv);
    if (!pl.outer.contains(uv)) {
        if (border >= kEdgeThreshold) return std::nullopt;
    }
    for (const ConvexPolygon& hole : pl.holes) {
        const double d = hole.boundary_distance(uv);
        if (hole.contains(uv) && d >= kEdgeThreshold) return std::nullopt;
        border = std::min(border, d);
    }
    hit.normal = n;
    hit.cos_incidence = denom;
    using std::abs;
    hit.tangential = abs(denom) < Real(kTangencyThreshold);
    hit.near_edge = border < kEdgeThreshold;
    return hit;
}

template <class Real>
std::optional<HitT<Real>> intersect_revolution(const Surface& s, const RevolutionPatch& rp,
                                               const LineElementT<Real>& x, const Real& t_min,
                                               const Real& t_max) {
    using std::abs;
    using std::max;
    using std::min;
    using std::sqrt;

    const auto a = Vec3T<Real>::from(rp.axis);
    const Vec3T<Real> w = x.q - Vec3T<Real>::from(rp.axis_point);
    const Real s0 = dot(w, a);
    const Real sv = dot(x.v, a);
    const Vec3T<Real> wp = w - s0 * a;
    const Vec3T<Real> vp = x.v - sv * a;
    const Real A = dot(vp, vp);
    const Real B = Real(2) * dot(wp, vp);
    const Real C = dot(wp, wp);

    Real lo = t_min;
    Real hi = t_max;
    const Real smin(rp.s_min);
    const Real smax(rp.s_max);
    if (sv != 0) {
        const Real ta = (smin - s0) / sv;
        const Real tb = (smax - s0) / sv;
        lo = max(lo, min(ta, tb));
        hi = min(hi, max(ta, tb));
    } else if (s0 < smin || s0 > smax) {
        return std::nullopt;
    }
    if (!(lo < hi)) return std::nullopt;

    // Bounding cylinder of the largest radius over the clip range.
    const Real rb(rp.max_radius());
    const Real c0 = C - rb * rb;
    Real t_in = lo;
    Real t_out = hi;
    if (A > 0) {
        const Real disc = B * B - Real(4) * A * c0;
        if (disc < 0) return std::nullopt;
        const Real sq = sqrt(disc);
        const Real qq = B >= 0 ? Real(-0.5) * (B + sq) : Real(-0.5) * (B - sq);
        Real r1 = qq / A;
        Real r2 = qq != 0 ? c0 / qq : r1;
        if (r1 > r2) std::swap(r1, r2);
        t_in = r1;
        t_out = r2;
    } else if (c0 > 0) {
        return std::nullopt;
    }

    HitT<Real> hit;
    auto finish = [&](const Real& t, bool grazing = false) -> std::optional<HitT<Real>> {
        hit.t = t;
        hit.point = x.q + t * x.v;
        const Vec3T<Real> rel = hit.point - Vec3T<Real>::from(rp.axis_point);
        const Real sh = dot(rel, a);
        const Vec3T<Real> perp = rel - sh * a;
        const Vec3T<Real> er = perp / norm(perp);
        const Real slope = rp.slope(sh - Real(rp.s_center));
        hit.normal = (er - slope * a) / sqrt(Real(1) + slope * slope);
        hit.cos_incidence = dot(x.v, hit.normal);
        if (grazing) hit.cos_incidence = -abs(hit.cos_incidence);
        if (!(hit.cos_incidence < 0) && !grazing) return std::nullopt;
        const Vec3 p{static_cast<double>(hit.point.x), static_cast<double>(hit.point.y),
                     static_cast<double>(hit.point.z)};
        constexpr double tol = 1e-9;
        if (p.x < s.clip_lo.x - tol || p.y < s.clip_lo.y - tol || p.z < s.clip_lo.z - tol ||
            p.x > s.clip_hi.x + tol || p.y > s.clip_hi.y + tol || p.z > s.clip_hi.z + tol)
            return std::nullopt;
        hit.tangential = grazing || abs(hit.cos_incidence) < Real(kTangencyThreshold);
        const double sd = static_cast<double>(sh);
        hit.near_edge = std::min(sd - rp.s_min, rp.s_max - sd) < kEdgeThreshold;
        return hit;
    };

    if (rp.straight()) {
        if (!(A > 0)) return std::nullopt;
        if (c0 < 0) return std::nullopt;  // starts inside
        if (!(t_in > lo) || t_in > hi) return std::nullopt;
        return finish(t_in);
    }

    // Cigar: the gap f(t) = d(t) - r(s(t)) is convex along any ray (d is a
    // norm of an affine map and r is concave for r_long > 0), so Newton from
    // the left of the first root increases monotonically towards it.
    const Real t_end = min(hi, t_out);
    Real t = max(lo, t_in);
    if (t > t_end) return std::nullopt;
    const Real tol = Real(64) * std::numeric_limits<Real>::epsilon();
    const Real sc(rp.s_center);
    const Real big(rp.r_long);
    auto gap = [&](const Real& tt) {
        const Vec3T<Real> pp = wp + tt * vp;
        return sqrt(dot(pp, pp)) - rp.radius(s0 + tt * sv - sc);
    };
    // Near a double root Newton stops short of the touching point, leaving a
    // small but non-tangential cos. Locate the minimum of the gap (f'' > 0)
    // and report a touch when the ray clears the surface within rounding.
    const Real curv_sign(rp.r_long > 0 ? 1 : -1);
    auto derivs = [&](const Real& tt, Real& f1, Real& f2) {
        const Vec3T<Real> pp = wp + tt * vp;
        const Real d = sqrt(dot(pp, pp));
        if (!(d > 0)) return false;
        const Real u = s0 + tt * sv - sc;
        const Real dd = dot(pp, vp) / d;
        const Real root = sqrt(big * big - u * u);
        f1 = dd - rp.slope(u) * sv;
        f2 = (A - dd * dd) / d + curv_sign * big * big / (root * root * root) * sv * sv;
        return f2 > 0;
    };
    auto settle = [&](const Real& t0) -> std::optional<HitT<Real>> {
        Real f1, f2;
        // a clean crossing has |f'| well above sqrt(f'' tol)
        if (!derivs(t0, f1, f2) || f1 * f1 > Real(16) * f2 * tol) return finish(t0);
        Real tm = t0;
        for (int k = 0; k < 60; ++k) {
            if (!derivs(tm, f1, f2)) break;
            const Real step = f1 / f2;
            tm -= step;
            if (abs(step) <= Real(4) * std::numeric_limits<Real>::epsilon() * (Real(1) + abs(tm))) break;
        }
        if (tm > t0 && tm <= t_end && gap(tm) > -tol) return finish(tm, true);
        return finish(t0);
    };
    for (int iter = 0; iter < 200; ++iter) {
        const Vec3T<Real> pp = wp + t * vp;
        const Real d = sqrt(dot(pp, pp));
        const Real u = s0 + t * sv - sc;
        const Real f = d - rp.radius(u);
        if (f <= tol) {
            if (iter == 0 && f < -tol && t == lo) return std::nullopt;  // started inside
            if (!(t > t_min)) return std::nullopt;
            return settle(t);
        }
        const Real dd = d > 0 ? dot(pp, vp) / d : Real(0);
        const Real fp = dd - rp.slope(u) * sv;
        if (!(fp < 0)) return std::nullopt;
        const Real t_next = t - f / fp;
        if (t_next > t_end) return std::nullopt;
        if (!(t_next > t)) {
            // stalled at a grazing minimum of f within rounding
            return settle(t);
        }
        t = t_next;
    }
    throw NumericFailure("cigar root polish did not converge");
}

}  // namespace

template <class Real>
std::optional<HitT<Real>> intersect_ray(const Surface& s, const LineElementT<Real>& x, Real t_min,
                                        Real t_max) {
    if (const auto* pl = s.planar()) return intersect_planar(*pl, x, t_min, t_max);
    return intersect_revolution(s, *s.revolution(), x, t_min, t_max);
}

template std::optional<HitT<double>> intersect_ray(const Surface&, const LineElementT<double>&, double,
                                                   double);
template std::optional<HitT<HighReal>> intersect_ray(const Surface&, const LineElementT<HighReal>&,
                                                     HighReal, HighReal);

//---------------------------------------------------------------------------//
// Local differential geometry

double revolution_gap(const RevolutionPatch& r, const Vec3& p) {
    const Vec3 rel = p - r.axis_point;
    const double s = dot(rel, r.axis);
    const double d = norm(rel - s * r.axis);
    return d - r.radius(s - r.s_center);
}

namespace {

struct RevolutionFrame {
    Vec3 radial;
    Vec3 circumferential;
    Vec3 meridian;  // unit tangent along the profile
    Vec3 normal;
    double s;
    double slope;
    double radius;
};

RevolutionFrame revolution_frame(const RevolutionPatch& r, const Vec3& p) {
    RevolutionFrame f;
    const Vec3 rel = p - r.axis_point;
    f.s = dot(rel, r.axis);
    f.radial = normalized(rel - f.s * r.axis);
    f.circumferential = cross(r.axis, f.radial);
    f.slope = r.slope(f.s - r.s_center);
    f.radius = r.radius(f.s - r.s_center);
    const double k = std::sqrt(1 + f.slope * f.slope);
    f.normal = (f.radial - f.slope * r.axis) / k;
    f.meridian = (r.axis + f.slope * f.radial) / k;
    return f;
}

}  // namespace

Vec3 surface_normal(const Surface& s, const Vec3& p) {
    if (const auto* pl = s.planar()) return pl->normal;
    return revolution_frame(*s.revolution(), p).normal;
}

std::pair<double, double> curvature_at(const Surface& s, const Vec3& p) {
    if (edge_distance(s, p) < kEdgeThreshold)
        throw EdgeProximity("curvature requested within the edge tolerance of a patch border");
    if (s.planar()) return {0.0, 0.0};
    const RevolutionPatch& r = *s.revolution();
    const RevolutionFrame f = revolution_frame(r, p);
    const double k_circ = 1.0 / (f.radius * std::sqrt(1 + f.slope * f.slope));
    const double k_mer = r.straight() ? 0.0 : 1.0 / r.r_long;
    return {k_circ, k_mer};
}

Mat3 shape_operator(const Surface& s, const Vec3& p) {
    Mat3 w;
    if (s.planar()) return w;
    const RevolutionPatch& r = *s.revolution();
    const RevolutionFrame f = revolution_frame(r, p);
    w.add_outer(1.0 / (f.radius * std::sqrt(1 + f.slope * f.slope)), f.circumferential);
    if (!r.straight()) w.add_outer(1.0 / r.r_long, f.meridian);
    return w;
}

double edge_distance(const Surface& s, const Vec3& p) {
    if (const auto* pl = s.planar()) {
        const Vec2 uv = pl->coords(p);
        double d = pl->outer.boundary_distance(uv);
        for (const ConvexPolygon& hole : pl->holes) d = std::min(d, hole.boundary_distance(uv));
        return d;
    }
    const RevolutionPatch& r = *s.revolution();
    const double sp = dot(p - r.axis_point, r.axis);
    return std::max(0.0, std::min(sp - r.s_min, r.s_max - sp));
}

double distance_to_surface(const Surface& s, const Vec3& p) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr double near = 1e-6;
    if (const auto* pl = s.planar()) {
        const double d = std::abs(dot(p - pl->origin, pl->normal));
        if (d > near) return d;
        const Vec2 uv = pl->coords(p);
        if (!pl->outer.contains(uv) && pl->outer.boundary_distance(uv) > near) return inf;
        return d;
    }
    const RevolutionPatch& r = *s.revolution();
    const Vec3 rel = p - r.axis_point;
    const double sp = dot(rel, r.axis);
    if (sp < r.s_min - near || sp > r.s_max + near) return inf;
    const double slope = r.slope(sp - r.s_center);
    const double d = norm(rel - sp * r.axis);
    return std::abs(d - r.radius(sp - r.s_center)) / std::sqrt(1 + slope * slope);
}

}  // namespace ltube
