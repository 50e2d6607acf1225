#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "ltube/vec3.hpp"

namespace ltube {

/// Hits with |v . o| below this are tangential (singular) collisions.
inline constexpr double kTangencyThreshold = 1e-9;
/// Hits closer than this to a patch border are edge (singular) collisions.
inline constexpr double kEdgeThreshold = 1e-9;

enum class SurfaceKind { Plane, Cylinder, Cigar, BulkheadFace, GatePlane };

const char* to_string(SurfaceKind kind);

/// Identity of a smooth boundary piece: cell index n, scatterer index i,
/// piece index within the scatterer.
struct SurfaceId {
    std::int64_t cell{0};
    int scatterer{0};
    int piece{0};

    friend bool operator==(const SurfaceId&, const SurfaceId&) = default;
};

/// Convex polygon in 2D face coordinates, counter-clockwise.
struct ConvexPolygon {
    std::vector<Vec2> vertices;

    bool contains(Vec2 p) const;
    /// Distance from p to the polygon boundary (inside or outside).
    double boundary_distance(Vec2 p) const;

    static ConvexPolygon square(Vec2 center, double side);
    static ConvexPolygon rectangle(Vec2 lo, Vec2 hi);
};

/// True when the two convex polygons overlap (separating-axis test).
bool polygons_overlap(const ConvexPolygon& a, const ConvexPolygon& b);

/// A flat patch: origin, inner unit normal (pointing into the free region),
/// in-plane orthonormal frame, an outer polygon and optional holes.
struct PlanarPatch {
    Vec3 origin;
    Vec3 normal;
    Vec3 e1;
    Vec3 e2;
    ConvexPolygon outer;
    std::vector<ConvexPolygon> holes;

    Vec2 coords(const Vec3& p) const;
    Vec3 point(Vec2 uv) const;
};

/// Solid of revolution about a straight axis, clipped to s in [s_min, s_max]
/// along the axis. The radius profile is
///   r(s) = rho + sgn(R) (sqrt(R^2 - (s - s_center)^2) - |R|),
/// i.e. a meridian circle of signed radius R = r_long. An infinite r_long is
/// a straight cylinder of radius rho.
struct RevolutionPatch {
    Vec3 axis_point;
    Vec3 axis;
    Vec3 e1;  // radial frame, e1 x e2 = axis
    Vec3 e2;
    double rho{0};
    double r_long{std::numeric_limits<double>::infinity()};
    double s_center{0};
    double s_min{0};
    double s_max{0};

    bool straight() const { return !(r_long < std::numeric_limits<double>::infinity()); }
    template <class Real>
    Real radius(const Real& u) const;  // u = s - s_center
    template <class Real>
    Real slope(const Real& u) const;   // dr/ds
    /// Largest radius over the clip range.
    double max_radius() const;
    double min_radius() const;
};

/// One smooth piece of scatterer boundary.
struct Surface {
    SurfaceKind kind{SurfaceKind::Plane};
    SurfaceId id;
    bool dispersing{false};
    std::variant<PlanarPatch, RevolutionPatch> shape;
    /// Axis-aligned cell box the piece is clipped to.
    Vec3 clip_lo;
    Vec3 clip_hi;

    const PlanarPatch* planar() const { return std::get_if<PlanarPatch>(&shape); }
    const RevolutionPatch* revolution() const { return std::get_if<RevolutionPatch>(&shape); }
    bool transparent() const { return kind == SurfaceKind::GatePlane; }
};

Surface make_plane(SurfaceId id, const PlanarPatch& patch, Vec3 clip_lo, Vec3 clip_hi);
Surface make_gate(SurfaceId id, const PlanarPatch& patch, Vec3 clip_lo, Vec3 clip_hi);
Surface make_bulkhead_face(SurfaceId id, const PlanarPatch& patch, Vec3 clip_lo, Vec3 clip_hi);
/// Straight cylinder when r_long is infinite, cigar otherwise.
Surface make_revolution(SurfaceId id, Vec3 axis_point, Vec3 axis, double rho, double r_long,
                        double s_center, double s_min, double s_max, Vec3 clip_lo, Vec3 clip_hi);

/// Copy of `s` shifted by `offset`.
Surface translated(const Surface& s, const Vec3& offset);

template <class Real>
struct HitT {
    Real t{0};
    Vec3T<Real> point;
    Vec3T<Real> normal;  // inner unit normal o_q
    Real cos_incidence{0};  // v . o_q, in [-1, 0] for an incoming ray
    bool tangential{false};
    bool near_edge{false};
};

using Hit = HitT<double>;

/// Elastic reflection v - 2 (v . o) o.
template <class Real>
Vec3T<Real> reflect(const Vec3T<Real>& v, const Vec3T<Real>& o) {
    return v - (Real(2) * dot(v, o)) * o;
}

/// First intersection of the ray q + t v with the clipped surface for t in
/// (t_min, t_max]. Planar patches only register rays approaching from the
/// free side. Revolution pieces are solved in closed form (cylinder) or by
/// Newton iteration on the convex gap function (cigar).
///
/// Throws NumericFailure if the cigar polish stalls.
template <class Real>
std::optional<HitT<Real>> intersect_ray(const Surface& s, const LineElementT<Real>& x, Real t_min,
                                        Real t_max);

/// Gap function of a revolution patch: transverse distance to the axis minus
/// the profile radius. Positive outside the solid.
double revolution_gap(const RevolutionPatch& r, const Vec3& p);

/// Inner unit normal at a point on the surface.
Vec3 surface_normal(const Surface& s, const Vec3& p);

/// Principal curvatures seen from the billiard domain. For revolution
/// patches k1 is the circumferential curvature and k2 the meridian one.
/// Throws EdgeProximity within kEdgeThreshold of the patch border.
std::pair<double, double> curvature_at(const Surface& s, const Vec3& p);

/// Symmetric 3x3 matrix.
struct Mat3 {
    std::array<std::array<double, 3>, 3> m{};

    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    /// Adds k * a a^T.
    void add_outer(double k, const Vec3& a);
};

/// Weingarten map (derivative of the inner normal field) at p, as a 3x3
/// matrix acting on vectors tangent to the surface.
Mat3 shape_operator(const Surface& s, const Vec3& p);

/// Euclidean distance from p to the border of the clipped patch.
double edge_distance(const Surface& s, const Vec3& p);

/// Approximate distance from p to the surface, ignoring holes. Far from the
/// surface (beyond 1e-6) a lower bound is returned; close to it, infinity
/// if p projects outside the patch. Used to detect seams where scatterers
/// meet.
double distance_to_surface(const Surface& s, const Vec3& p);

template <class Real>
Real RevolutionPatch::radius(const Real& u) const {
    using std::abs;
    using std::sqrt;
    if (straight()) return Real(rho);
    const Real big = abs(Real(r_long));
    const Real drop = u * u / (sqrt(big * big - u * u) + big);
    return r_long > 0 ? Real(rho) - drop : Real(rho) + drop;
}

template <class Real>
Real RevolutionPatch::slope(const Real& u) const {
    using std::sqrt;
    if (straight()) return Real(0);
    const Real big = Real(r_long);
    const Real root = sqrt(big * big - u * u);
    return r_long > 0 ? -u / root : u / root;
}

// Explicit instantiations live in geometry.cpp.
extern template std::optional<HitT<double>> intersect_ray(const Surface&, const LineElementT<double>&,
                                                          double, double);

}  // namespace ltube
