#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ltube/flow.hpp"
#include "ltube/rng.hpp"
#include "ltube/tube.hpp"

namespace ltube {

enum class SectionKind { M, N, D };

const char* to_string(SectionKind k);

/// Base set of a Poincare section inside one cell.
///   M: post-collisional elements on the listed dispersing scatterers with
///      v . o >= eps (alpha = (cell, scatterer));
///   N: elements entering the cell through the listed gates (1 = x=0, 2 = x=h);
///   D: post-collisional elements on the listed scatterers.
struct SectionSpec {
    SectionKind kind{SectionKind::N};
    std::int64_t cell{0};
    std::vector<int> members;
    double eps{0};

    static SectionSpec M(std::int64_t cell, int scatterer, double eps) {
        return {SectionKind::M, cell, {scatterer}, eps};
    }
    static SectionSpec M_all(std::int64_t cell, double eps) { return {SectionKind::M, cell, {0, 1, 2, 3}, eps}; }
    static SectionSpec N(std::int64_t cell, std::vector<int> gates = {1, 2}) {
        return {SectionKind::N, cell, std::move(gates), 0};
    }
    static SectionSpec D(std::int64_t cell, std::vector<int> scatterers) {
        return {SectionKind::D, cell, std::move(scatterers), 0};
    }
};

/// A line element on a section, in cell-local coordinates.
struct SectionPoint {
    SectionKind section{SectionKind::N};
    SurfaceId id;          // for N the scatterer is kGateLeft / kGateRight
    int surface_index{-1};  // index into the cell's surfaces
    LineElement x;
    double cos_out{0};  // v . o at q

    /// Gate number 1 or 2 of an N point.
    int gate() const { return id.scatterer == scatterer::kGateLeft ? 1 : 2; }
    /// Flow state resuming from this point, nudged like the state after a
    /// flow event.
    FlowState state() const;
};

/// Gate j of cell n as an N point with the given local line element.
SectionPoint gate_point(const CellConfig& cell, int gate, const LineElement& x);

/// Draws points with q uniform on the base set and v distributed with
/// density proportional to v . o on the hemisphere (restricted to v . o >= eps
/// for M). Throws InvalidSection for an empty base set or velocity cap.
std::vector<SectionPoint> sample_measure(const QuenchedTube& tube, const SectionSpec& spec, std::int64_t count,
                                         Rng& rng);
/// Same on an explicit cell (spec.cell is ignored), e.g. one built without
/// validation.
std::vector<SectionPoint> sample_measure(const CellConfig& cell, const SectionSpec& spec, std::int64_t count,
                                         Rng& rng);

/// Area of the base set (the part of the pieces bounding the free region),
/// by midpoint quadrature on a grid of `resolution`^2 nodes per piece.
double section_area(const QuenchedTube& tube, const SectionSpec& spec, int resolution = 1000);

/// Invariant measure of the whole section: area times the velocity weight
/// (pi for a full hemisphere, pi (1 - eps^2) for the M cap).
double section_measure(const QuenchedTube& tube, const SectionSpec& spec, int resolution = 1000);

struct SectionReturn {
    SectionPoint point;
    double time{0};
    std::int64_t collisions{0};  // reflections, including the one landing on the section
    std::int64_t events{0};
    int exit_sign{0};  // N returns only
};

/// One flow event of an itinerary: the surface met and the event kind.
struct ItineraryStep {
    SurfaceId surface;
    EventKind kind{EventKind::Flat};

    friend bool operator==(const ItineraryStep&, const ItineraryStep&) = default;
};

/// Post-collisional elements with |v . o - eps| below this are on the extra
/// singularity of the M section.
inline constexpr double kSectionBoundaryThreshold = 1e-9;

enum class ReturnStatus { Returned, SingularTangential, SingularEdge, SectionBoundary, Budget };

const char* to_string(ReturnStatus s);

/// Outcome of following an orbit to the next M point without throwing.
struct MWalk {
    ReturnStatus status{ReturnStatus::Budget};
    SectionReturn ret;
    std::vector<ItineraryStep> itinerary;  // filled when requested
};

MWalk walk_M(const QuenchedTube& tube, const SectionPoint& p, double eps, std::int64_t event_budget,
             bool record_itinerary);

/// Next point of the global head-on section: the first post-collisional
/// element on a dispersing piece with v . o >= eps. `event_budget` bounds the
/// flow events. Throws SingularOrbit on tangential/edge events, on
/// v . o = eps, or when the budget runs out.
SectionReturn poincare_M(const QuenchedTube& tube, const SectionPoint& p, double eps,
                         std::int64_t event_budget = 10'000'000);

/// Next gate crossing; returns the element entering the neighbouring cell.
/// Throws SingularOrbit, or NotExited when `collision_budget` reflections
/// pass without a crossing.
SectionReturn poincare_N(const QuenchedTube& tube, const SectionPoint& p,
                         std::int64_t collision_budget = 1'000'000);

/// First return to D within `collision_budget` reflections; nullopt is the
/// NotReturned outcome. With `any_cell` the listed scatterers of every cell
/// count. Throws SingularOrbit.
std::optional<SectionReturn> first_return_D(const QuenchedTube& tube, const SectionSpec& D, const SectionPoint& p,
                                            std::int64_t collision_budget, bool any_cell = false);

/// Section points of a fixed cell surface piece built from a point and an
/// outgoing direction (normal computed from the geometry).
SectionPoint surface_point(const CellConfig& cell, SectionKind kind, int surface_index, const Vec3& q,
                           const Vec3& v);

}  // namespace ltube
