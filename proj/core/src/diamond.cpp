#include <algorithm>
#include <cmath>
#include <limits>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"
#include "ltube/precision.hpp"

namespace ltube {

namespace {

constexpr double kCornerX[4] = {0, 1, 1, 0};
constexpr double kCornerY[4] = {0, 0, 1, 1};

}  // namespace

template <class Real>
DiamondStepT<Real> diamond_step(double rho, const DiamondStateT<Real>& s) {
    using std::abs;
    using std::acos;
    using std::sqrt;
    const Real r(rho);
    int best = -1;
    Real t_best(0);
    for (int k = 0; k < 4; ++k) {
        const Real dx = s.px - Real(kCornerX[k]);
        const Real dy = s.py - Real(kCornerY[k]);
        const Real b = dx * s.wx + dy * s.wy;
        const Real c = dx * dx + dy * dy - r * r;
        const Real disc = b * b - c;
        if (disc < 0) continue;
        const Real t = -b - sqrt(disc);
        if (!(t > Real(1e-12))) continue;
        if (best < 0 || t < t_best) {
            best = k;
            t_best = t;
        }
    }
    if (best < 0) throw SingularOrbit("diamond orbit escaped the table");

    DiamondStepT<Real> out;
    out.t = t_best;
    out.arc = best;
    const Real hx = s.px + t_best * s.wx;
    const Real hy = s.py + t_best * s.wy;
    for (int k = 0; k < 4; ++k) {
        if (k == best) continue;
        const Real dx = hx - Real(kCornerX[k]);
        const Real dy = hy - Real(kCornerY[k]);
        if (abs(sqrt(dx * dx + dy * dy) - r) < Real(kEdgeThreshold))
            throw SingularOrbit("diamond orbit hits a vertex");
    }
    const Real nx = (hx - Real(kCornerX[best])) / r;
    const Real ny = (hy - Real(kCornerY[best])) / r;
    const Real wn = s.wx * nx + s.wy * ny;
    out.cos_phi = -wn;
    if (out.cos_phi < Real(kTangencyThreshold)) throw SingularOrbit("tangential diamond collision");
    out.phi = acos(out.cos_phi);
    Real wx = s.wx - Real(2) * wn * nx;
    Real wy = s.wy - Real(2) * wn * ny;
    const Real len = sqrt(wx * wx + wy * wy);
    out.state = {hx, hy, wx / len, wy / len};
    return out;
}

template DiamondStepT<double> diamond_step(double, const DiamondStateT<double>&);
template DiamondStepT<HighReal> diamond_step(double, const DiamondStateT<HighReal>&);

int diamond_zone(double rho, double px, double py) {
    const double a = std::sqrt(rho * rho - 0.25);
    const double vx[4] = {0.5, 1 - a, 0.5, a};
    const double vy[4] = {a, 0.5, 1 - a, 0.5};
    int best = 0;
    double d_best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
        const double d = std::hypot(px - vx[k], py - vy[k]);
        if (d < d_best) {
            d_best = d;
            best = k;
        }
    }
    return best;
}

namespace {

DiamondState random_diamond_state(double rho, Rng& rng) {
    for (;;) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        bool free = true;
        for (int k = 0; k < 4; ++k)
            if (std::hypot(x - kCornerX[k], y - kCornerY[k]) <= rho) free = false;
        if (!free) continue;
        const double a = 2 * M_PI * rng.uniform();
        return {x, y, std::cos(a), std::sin(a)};
    }
}

}  // namespace

DiamondZoneReport diamond_zone_statistics(double rho, std::int64_t steps, Rng& rng) {
    CellParameters p;
    p.rho = rho;
    const DerivedConstants c = derived_constants(CellTemplate::unchecked(p));
    DiamondZoneReport r;
    r.M = c.M;
    r.L1 = c.L1;
    r.phi_bound = (M_PI - c.gamma) / 2;
    r.min_zone_change_time = std::numeric_limits<double>::infinity();

    DiamondState s = random_diamond_state(rho, rng);
    int zone = -1;
    bool first_run = true;
    std::int64_t run_length = 0;
    bool run_headon = false;
    double since_run_start = 0;
    while (r.steps < steps) {
        DiamondStep st;
        try {
            st = diamond_step(rho, s);
        } catch (const SingularOrbit&) {
            ++r.singular_restarts;
            s = random_diamond_state(rho, rng);
            zone = -1;
            first_run = true;
            continue;
        }
        ++r.steps;
        s = st.state;
        since_run_start += st.t;
        const int z = diamond_zone(rho, st.state.px, st.state.py);
        if (z != zone) {
            if (zone >= 0) {
                // the run that just ended is complete unless it began the orbit
                if (!first_run) {
                    ++r.runs;
                    r.max_run_length = std::max(r.max_run_length, run_length);
                    if (!run_headon) ++r.runs_without_headon;
                    r.min_zone_change_time = std::min(r.min_zone_change_time, since_run_start);
                }
                first_run = false;
            }
            zone = z;
            run_length = 0;
            run_headon = false;
            since_run_start = 0;
        }
        ++run_length;
        if (st.phi < r.phi_bound) run_headon = true;
    }
    if (r.runs == 0) r.min_zone_change_time = 0;
    return r;
}

ProjectionReport projection_check(const QuenchedTube& tube, const LineElement& x0, std::int64_t n) {
    const CellParameters& p = tube.config().cell;
    if (p.bulkhead || !p.cigars || std::isfinite(p.r_long) || tube.config().perturbation != 0)
        throw ConfigError("projection check needs the straight-cylinder tube without bulkhead");
    for (const Vec2& o : p.axis_offsets)
        if (o.u != 0 || o.v != 0) throw ConfigError("projection check needs unshifted cylinder axes");

    using R = HighReal;
    ProjectionReport rep;
    rep.orbits = 1;
    LineElementT<R> start = LineElementT<R>::from(x0);
    start.v = normalized(start.v);
    FlowStateT<R> s = make_state(tube, start);
    const R vyz = sqrt(s.x.v.y * s.x.v.y + s.x.v.z * s.x.v.z);
    if (!(vyz > R(1e-12))) throw ConfigError("projection check needs a transverse velocity component");
    DiamondStateT<R> d{s.x.q.y, s.x.q.z, s.x.v.y / vyz, s.x.v.z / vyz};
    double max_pt = 0;
    double max_id = 0;
    while (rep.collisions < n) {
        const CollisionEventT<R> ev = next_event(tube, s);
        if (is_singular(ev.kind)) throw SingularOrbit(std::string("projection check met a ") + to_string(ev.kind));
        s = ev.after;
        if (ev.kind != EventKind::Dispersing) continue;
        const DiamondStepT<R> st = diamond_step(p.rho, d);
        d = st.state;
        const R dy = ev.hit.point.y - st.state.px;
        const R dz = ev.hit.point.z - st.state.py;
        max_pt = std::max(max_pt, static_cast<double>(sqrt(dy * dy + dz * dz)));
        const R cos_theta = abs(ev.hit.cos_incidence);
        max_id = std::max(max_id, static_cast<double>(abs(cos_theta - vyz * st.cos_phi)));
        ++rep.collisions;
    }
    rep.max_point_deviation = max_pt;
    rep.max_identity_deviation = max_id;
    return rep;
}

}  // namespace ltube
