#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ltube/geometry.hpp"
#include "ltube/tube.hpp"

namespace ltube {

/// Post-collision advance along the new velocity before the next query.
inline constexpr double kNudge = 1e-12;
/// Points closer than this to a second solid piece are seam (edge) hits.
inline constexpr double kSeamThreshold = 1e-9;

/// Flow state. Positions are cell-local: q lies in [0,h] x [0,1] x [0,1] of
/// cell `cell`; the world position is q + cell * (h, 0, 0).
template <class Real>
struct FlowStateT {
    LineElementT<Real> x;
    std::int64_t cell{0};
    Real time{0};
    Real time_carry{0};  // compensated-summation remainder of `time`
    std::int64_t collisions{0};
    /// Surface reflected from last; convex pieces and planes cannot be hit
    /// again immediately, so it is skipped by the next query.
    int last_surface{-1};

    /// Adds dt to the clock with Kahan compensation.
    void add_time(const Real& dt) {
        const Real y = dt - time_carry;
        const Real t = time + y;
        time_carry = (t - time) - y;
        time = t;
    }
    Vec3T<Real> world_q(double h) const {
        return {x.q.x + Real(static_cast<double>(cell) * h), x.q.y, x.q.z};
    }
};

using FlowState = FlowStateT<double>;

enum class EventKind { Dispersing, Flat, GateCrossing, SingularTangential, SingularEdge };

const char* to_string(EventKind kind);

inline bool is_singular(EventKind k) {
    return k == EventKind::SingularTangential || k == EventKind::SingularEdge;
}
inline bool is_reflection(EventKind k) { return k == EventKind::Dispersing || k == EventKind::Flat; }

template <class Real>
struct CollisionEventT {
    FlowStateT<Real> before;  // advanced to the hit point, pre-collision velocity
    FlowStateT<Real> after;
    HitT<Real> hit;  // cell-local point
    SurfaceId surface;
    int surface_index{-1};  // index into CellConfig::surfaces
    EventKind kind{EventKind::Flat};
    int exit_sign{0};  // +1 / -1 for gate crossings
};

using CollisionEvent = CollisionEventT<double>;

enum class Termination { Budget, SingularTangential, SingularEdge };

const char* to_string(Termination t);

struct StopCondition {
    std::int64_t max_collisions{std::numeric_limits<std::int64_t>::max()};
    double max_time{std::numeric_limits<double>::infinity()};

    static StopCondition collisions(std::int64_t n) { return {n, std::numeric_limits<double>::infinity()}; }
    static StopCondition time(double t) { return {std::numeric_limits<std::int64_t>::max(), t}; }
};

template <class Real>
struct TrajectoryT {
    FlowStateT<Real> initial;
    std::vector<CollisionEventT<Real>> events;
    FlowStateT<Real> final_state;
    Termination termination{Termination::Budget};
};

using Trajectory = TrajectoryT<double>;

/// Initial state from a world-frame line element; the cell index is taken
/// from the longitudinal coordinate.
template <class Real>
FlowStateT<Real> make_state(const QuenchedTube& tube, const LineElementT<Real>& world);

/// Time reversal of a flow state; the skipped surface is cleared because the
/// reversed ray heads back into it.
template <class Real>
FlowStateT<Real> reversed(const FlowStateT<Real>& s) {
    FlowStateT<Real> out = s;
    out.x = reverse(s.x);
    out.last_surface = -1;
    return out;
}

/// Next event of the flow inside `cell` (the cell of s). Every cell is
/// sealed by its walls and gates, so only its own surfaces are tested.
///
/// Throws StuckTrajectory if nothing is hit within 4h.
template <class Real>
CollisionEventT<Real> next_event(const CellConfig& cell, const FlowStateT<Real>& s);

template <class Real>
CollisionEventT<Real> next_event(const QuenchedTube& tube, const FlowStateT<Real>& s) {
    return next_event(tube.cell(s.cell), s);
}

/// Free flight of duration dt without collision checks.
template <class Real>
FlowStateT<Real> advance(const FlowStateT<Real>& s, const Real& dt);

/// Iterates next_event until the stop condition or a singular event. A time
/// limit advances the final state freely to exactly `max_time`.
template <class Real>
TrajectoryT<Real> trace(const QuenchedTube& tube, const FlowStateT<Real>& s0, const StopCondition& stop);

inline Trajectory trace(const QuenchedTube& tube, const LineElement& x0, const StopCondition& stop) {
    return trace(tube, make_state(tube, x0), stop);
}

extern template FlowStateT<double> make_state(const QuenchedTube&, const LineElementT<double>&);
extern template CollisionEventT<double> next_event(const CellConfig&, const FlowStateT<double>&);
extern template FlowStateT<double> advance(const FlowStateT<double>&, const double&);
extern template TrajectoryT<double> trace(const QuenchedTube&, const FlowStateT<double>&,
                                          const StopCondition&);

}  // namespace ltube
