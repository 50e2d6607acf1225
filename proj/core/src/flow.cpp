#include "ltube/flow.hpp"

#include <cmath>

#include "ltube/errors.hpp"
#include "ltube/precision.hpp"

namespace ltube {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Dispersing: return "Dispersing";
        case EventKind::Flat: return "Flat";
        case EventKind::GateCrossing: return "GateCrossing";
        case EventKind::SingularTangential: return "SingularTangential";
        case EventKind::SingularEdge: return "SingularEdge";
    }
    return "?";
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Budget: return "Budget";
        case Termination::SingularTangential: return "SingularTangential";
        case Termination::SingularEdge: return "SingularEdge";
    }
    return "?";
}

namespace {

template <class Real>
Vec3 to_double(const Vec3T<Real>& v) {
    return {static_cast<double>(v.x), static_cast<double>(v.y), static_cast<double>(v.z)};
}

}  // namespace

template <class Real>
FlowStateT<Real> make_state(const QuenchedTube& tube, const LineElementT<Real>& world) {
    using std::floor;
    const double h = tube.h();
    FlowStateT<Real> s;
    s.cell = static_cast<std::int64_t>(std::floor(static_cast<double>(world.q.x) / h));
    // A point exactly on a gate plane belongs to the cell it moves into.
    const Real local = world.q.x - Real(static_cast<double>(s.cell) * h);
    if (local == 0 && world.v.x < 0) s.cell -= 1;
    s.x = world;
    s.x.q.x = world.q.x - Real(static_cast<double>(s.cell) * h);
    return s;
}

template <class Real>
FlowStateT<Real> advance(const FlowStateT<Real>& s, const Real& dt) {
    FlowStateT<Real> out = s;
    out.x.q += dt * s.x.v;
    out.add_time(dt);
    return out;
}

template <class Real>
CollisionEventT<Real> next_event(const CellConfig& cell, const FlowStateT<Real>& s) {
    const Real t_cap(4 * cell.h());
    Real t_best = t_cap;
    std::optional<HitT<Real>> best;
    int best_index = -1;
    const int count = static_cast<int>(cell.surfaces.size());
    for (int i = 0; i < count; ++i) {
        if (i == s.last_surface) continue;
        auto hit = intersect_ray(cell.surfaces[i], s.x, Real(0), t_best);
        if (hit && hit->t <= t_best) {
            t_best = hit->t;
            best = hit;
            best_index = i;
        }
    }
    if (!best) {
        throw StuckTrajectory("no boundary hit within 4h from cell " + std::to_string(s.cell));
    }

    const Surface& surf = cell.surfaces[best_index];
    CollisionEventT<Real> ev;
    ev.hit = *best;
    ev.surface = surf.id;
    ev.surface_index = best_index;
    ev.before = s;
    ev.before.x.q = best->point;
    ev.before.add_time(best->t);

    if (best->near_edge) {
        ev.kind = EventKind::SingularEdge;
    } else if (best->tangential) {
        ev.kind = EventKind::SingularTangential;
    } else if (surf.transparent()) {
        ev.kind = EventKind::GateCrossing;
    } else if (cell.seam_distance(to_double(best->point), surf.id.scatterer) < kSeamThreshold) {
        ev.kind = EventKind::SingularEdge;
    } else {
        ev.kind = surf.dispersing ? EventKind::Dispersing : EventKind::Flat;
    }

    ev.after = ev.before;
    const Real nudge(kNudge);
    switch (ev.kind) {
        case EventKind::SingularEdge:
        case EventKind::SingularTangential: break;
        case EventKind::GateCrossing: {
            const bool right = surf.id.scatterer == scatterer::kGateRight;
            ev.exit_sign = right ? 1 : -1;
            ev.after.cell += ev.exit_sign;
            ev.after.x.q.x -= Real(ev.exit_sign * cell.h());
            ev.after.x.q += nudge * ev.after.x.v;
            ev.after.add_time(nudge);
            ev.after.last_surface = -1;
            break;
        }
        case EventKind::Dispersing:
        case EventKind::Flat:
            ev.after.x.v = reflect(ev.before.x.v, best->normal);
            // keep |v| = 1 against the slow drift from rounding in the normal
            ev.after.x.v = ev.after.x.v / norm(ev.after.x.v);
            ev.after.last_surface = best_index;
            ev.after.x.q += nudge * ev.after.x.v;
            ev.after.add_time(nudge);
            ev.after.collisions += 1;
            break;
    }
    return ev;
}

template <class Real>
TrajectoryT<Real> trace(const QuenchedTube& tube, const FlowStateT<Real>& s0, const StopCondition& stop) {
    TrajectoryT<Real> out;
    out.initial = s0;
    FlowStateT<Real> s = s0;
    const CellConfig* cell = &tube.cell(s.cell);
    const Real t_stop(stop.max_time);
    std::int64_t taken = 0;
    while (taken < stop.max_collisions) {
        CollisionEventT<Real> ev = next_event(*cell, s);
        if (ev.before.time > t_stop) {
            s = advance(s, t_stop - s.time);
            break;
        }
        if (is_reflection(ev.kind)) ++taken;
        const EventKind kind = ev.kind;
        s = ev.after;
        out.events.push_back(std::move(ev));
        if (kind == EventKind::SingularTangential) {
            out.termination = Termination::SingularTangential;
            break;
        }
        if (kind == EventKind::SingularEdge) {
            out.termination = Termination::SingularEdge;
            break;
        }
        if (kind == EventKind::GateCrossing) cell = &tube.cell(s.cell);
    }
    out.final_state = s;
    return out;
}

#define LTUBE_INSTANTIATE_FLOW(Real)                                                                   \
    template FlowStateT<Real> make_state(const QuenchedTube&, const LineElementT<Real>&);              \
    template CollisionEventT<Real> next_event(const CellConfig&, const FlowStateT<Real>&);             \
    template FlowStateT<Real> advance(const FlowStateT<Real>&, const Real&);                           \
    template TrajectoryT<Real> trace(const QuenchedTube&, const FlowStateT<Real>&, const StopCondition&);

LTUBE_INSTANTIATE_FLOW(double)
LTUBE_INSTANTIATE_FLOW(HighReal)

}  // namespace ltube
